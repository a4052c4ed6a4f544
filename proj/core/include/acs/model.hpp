#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acs/dataset.hpp"
#include "acs/quant.hpp"
#include "acs/tensor.hpp"

namespace acs {

enum class ForwardMode { full_precision, quantized };

struct Layer {
    Tensor2 weights; // out x in
    std::vector<double> bias;
    bool relu = false;
    // Absent config means the tensor stays full-precision in quantized mode.
    std::optional<QuantConfig> weight_quant;
    std::optional<QuantConfig> act_quant;
};

// Model-level quantization plan. A width of 32 disables quantization for
// that tensor class entirely.
struct QuantSpec {
    int weight_bits = 32;
    int activation_bits = 32;
    bool full_precision_first_last = true;
};

// Fully connected ReLU network with a softmax head. Real-valued weights
// are the only stored parameters; the quantized view is recomputed from
// them on demand, so updates always flow into the real weights.
struct Model {
    std::vector<std::size_t> arch; // layer widths, input first
    std::vector<Layer> layers;
    QuantSpec quant_spec;
    std::uint64_t init_seed = 0;
    // Bumped on every parameter mutation; traces carry the value they saw.
    std::uint64_t revision = 0;

    std::size_t input_width() const { return arch.front(); }
    std::size_t output_width() const { return arch.back(); }
    std::size_t parameter_count() const;
};

// Everything backward needs from the forward pass: per-layer inputs as
// consumed (post activation quantization), pre-activations, and raw ReLU
// outputs before activation quantization.
struct ForwardTrace {
    ForwardMode mode = ForwardMode::full_precision;
    std::uint64_t model_revision = 0;
    std::size_t batch = 0;
    std::vector<Tensor2> inputs;
    std::vector<Tensor2> preacts;
    std::vector<Tensor2> relu_outputs;
    Tensor2 probs; // batch x classes
};

// He-style seeded uniform init: weights from U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
// biases zero. Identical seed and arch give bit-identical parameters.
Model init_model(const std::vector<std::size_t>& arch, std::uint64_t seed);

// Attaches uncalibrated quantizer configs at the requested widths. Weights use signed
// grids; activations (post-ReLU, hence non-negative) use unsigned grids.
void configure_quantization(Model& m, const QuantSpec& spec);

// Fixes weight scales from the current real-valued weights, one scale per
// layer.
void calibrate_weight_scales(Model& m);

// Fixes activation scales from a full-precision forward pass over the
// given batch (max-abs per layer output).
void calibrate_activation_scales(Model& m, const Tensor2& batch);

// Runs the network over a batch (rows are samples). In quantized mode each
// configured tensor passes through its fake quantizer; configs must be
// calibrated first.
ForwardTrace forward(const Model& m, const Tensor2& x, ForwardMode mode);

// Convenience single-sample probabilities.
ProbVector predict_one(const Model& m, const std::vector<double>& features,
                       ForwardMode mode);

// Cross-entropy backprop through the trace. Gradients are summed over the
// batch. In quantized mode the straight-through estimator gates every
// gradient that crossed a fake quantizer. Targets may be one-hot or soft.
GradientBuffer backward(const Model& m, const ForwardTrace& trace,
                        const Tensor2& targets);

void apply_sgd(Model& m, const GradientBuffer& g, double lr);

// Classification accuracy; argmax ties resolve to the lowest class index.
double evaluate(const Model& m, const Dataset& data, ForwardMode mode);

// Versioned binary checkpoint carrying arch, seeds, quantizer configs and
// raw weights. load(save(m)) reproduces the model bit-exactly.
void save_model(const Model& m, const std::string& path,
                const std::string& role);
struct LoadedModel {
    Model model;
    std::string role;
};
LoadedModel load_model(const std::string& path);

} // namespace acs
