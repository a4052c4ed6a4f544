#include "acs/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "acs/errors.hpp"
#include "acs/rng.hpp"

namespace acs {

namespace {

void require_calibrated(const Model& m) {
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& layer = m.layers[l];
        if (layer.weight_quant && !layer.weight_quant->calibrated) {
            throw StateError("forward: weight quantizer of layer " +
                             std::to_string(l) + " not calibrated");
        }
        if (layer.act_quant && !layer.act_quant->calibrated) {
            throw StateError("forward: activation quantizer of layer " +
                             std::to_string(l) + " not calibrated");
        }
    }
}

Tensor2 effective_weights(const Layer& layer, ForwardMode mode) {
    if (mode != ForwardMode::quantized || !layer.weight_quant) {
        return layer.weights;
    }
    Tensor2 w = layer.weights;
    for (double& x : w.v) {
        x = quantize(x, *layer.weight_quant);
    }
    return w;
}

} // namespace

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += l.weights.size() + l.bias.size();
    }
    return n;
}

Model init_model(const std::vector<std::size_t>& arch, std::uint64_t seed) {
    if (arch.size() < 2) {
        throw ConfigError("init_model: arch needs at least input and output widths");
    }
    for (std::size_t w : arch) {
        if (w == 0) {
            throw ConfigError("init_model: zero-width layer");
        }
    }
    Model m;
    m.arch = arch;
    m.init_seed = seed;
    Rng rng(seed);
    m.layers.resize(arch.size() - 1);
    for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
        const std::size_t fan_in = arch[l];
        const std::size_t fan_out = arch[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        Layer& layer = m.layers[l];
        layer.weights = Tensor2(fan_out, fan_in);
        for (double& x : layer.weights.v) {
            x = rng.uniform(-limit, limit);
        }
        layer.bias.assign(fan_out, 0.0);
        layer.relu = (l + 2 < arch.size());
    }
    return m;
}

void configure_quantization(Model& m, const QuantSpec& spec) {
    auto valid_bits = [](int b) { return b == 32 || (b >= 1 && b <= 30); };
    if (!valid_bits(spec.weight_bits) || !valid_bits(spec.activation_bits)) {
        throw ConfigError("configure_quantization: bit width must be 1..30 or 32");
    }
    const std::size_t last = m.layers.size() - 1;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        Layer& layer = m.layers[l];
        const bool edge = (l == 0 || l == last);
        if (spec.weight_bits < 32 &&
            !(spec.full_precision_first_last && edge)) {
            layer.weight_quant = make_quant_config(spec.weight_bits, true);
        } else {
            layer.weight_quant.reset();
        }
        if (spec.activation_bits < 32 && layer.relu) {
            layer.act_quant = make_quant_config(spec.activation_bits, false);
        } else {
            layer.act_quant.reset();
        }
    }
    m.quant_spec = spec;
    ++m.revision;
}

void calibrate_weight_scales(Model& m) {
    for (auto& layer : m.layers) {
        if (layer.weight_quant) {
            layer.weight_quant =
                calibrate_scale(layer.weights.v, *layer.weight_quant);
        }
    }
    ++m.revision;
}

void calibrate_activation_scales(Model& m, const Tensor2& batch) {
    bool any = false;
    for (const auto& layer : m.layers) {
        any = any || layer.act_quant.has_value();
    }
    if (!any) return;
    const ForwardTrace trace = forward(m, batch, ForwardMode::full_precision);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto& layer = m.layers[l];
        if (layer.act_quant) {
            layer.act_quant =
                calibrate_scale(trace.relu_outputs[l].v, *layer.act_quant);
        }
    }
    ++m.revision;
}

ForwardTrace forward(const Model& m, const Tensor2& x, ForwardMode mode) {
    if (m.layers.empty()) {
        throw StateError("forward: uninitialized model");
    }
    if (x.rows == 0) {
        throw DimensionError("forward: empty batch");
    }
    if (x.cols != m.input_width()) {
        throw DimensionError("forward: input width " + std::to_string(x.cols) +
                             ", model expects " +
                             std::to_string(m.input_width()));
    }
    if (mode == ForwardMode::quantized) {
        require_calibrated(m);
    }

    ForwardTrace trace;
    trace.mode = mode;
    trace.model_revision = m.revision;
    trace.batch = x.rows;
    trace.inputs.reserve(m.layers.size());
    trace.preacts.reserve(m.layers.size());
    trace.relu_outputs.reserve(m.layers.size());

    Tensor2 cur = x;
    for (const auto& layer : m.layers) {
        const Tensor2 w = effective_weights(layer, mode);
        const std::size_t out = w.rows;
        const std::size_t in = w.cols;
        Tensor2 z(cur.rows, out);
        for (std::size_t b = 0; b < cur.rows; ++b) {
            const double* xi = cur.row(b);
            double* zo = z.row(b);
            for (std::size_t o = 0; o < out; ++o) {
                const double* wr = w.row(o);
                double acc = layer.bias[o];
                for (std::size_t i = 0; i < in; ++i) {
                    acc += wr[i] * xi[i];
                }
                zo[o] = acc;
            }
        }
        Tensor2 a = z;
        if (layer.relu) {
            for (double& v : a.v) {
                v = v > 0.0 ? v : 0.0;
            }
        }
        trace.inputs.push_back(std::move(cur));
        trace.preacts.push_back(z);
        trace.relu_outputs.push_back(a);
        if (mode == ForwardMode::quantized && layer.act_quant) {
            for (double& v : a.v) {
                v = quantize(v, *layer.act_quant);
            }
        }
        cur = std::move(a);
    }

    const Tensor2& logits = trace.preacts.back();
    trace.probs = Tensor2(logits.rows, logits.cols);
    std::vector<double> row(logits.cols);
    for (std::size_t b = 0; b < logits.rows; ++b) {
        std::copy(logits.row(b), logits.row(b) + logits.cols, row.begin());
        const ProbVector p = softmax(row);
        std::copy(p.begin(), p.end(), trace.probs.row(b));
    }
    return trace;
}

ProbVector predict_one(const Model& m, const std::vector<double>& features,
                       ForwardMode mode) {
    Tensor2 x(1, features.size());
    std::copy(features.begin(), features.end(), x.row(0));
    const ForwardTrace t = forward(m, x, mode);
    return ProbVector(std::vector<double>(t.probs.row(0),
                                          t.probs.row(0) + t.probs.cols));
}

GradientBuffer backward(const Model& m, const ForwardTrace& trace,
                        const Tensor2& targets) {
    if (trace.model_revision != m.revision) {
        throw StateError("backward: trace is stale, rerun forward");
    }
    if (trace.preacts.size() != m.layers.size()) {
        throw StateError("backward: trace does not match model depth");
    }
    if (targets.rows != trace.batch || targets.cols != m.output_width()) {
        throw DimensionError("backward: target shape mismatch");
    }

    const std::size_t depth = m.layers.size();
    GradientBuffer grads;
    grads.layers.resize(depth);

    // Cross-entropy over softmax collapses to probs - targets at the logits.
    Tensor2 delta(trace.batch, m.output_width());
    for (std::size_t i = 0; i < delta.v.size(); ++i) {
        delta.v[i] = trace.probs.v[i] - targets.v[i];
    }

    for (std::size_t l = depth; l-- > 0;) {
        const Layer& layer = m.layers[l];
        const Tensor2& input = trace.inputs[l];
        const std::size_t out = layer.weights.rows;
        const std::size_t in = layer.weights.cols;

        LayerGrad& g = grads.layers[l];
        g.weights = Tensor2(out, in);
        g.bias.assign(out, 0.0);
        for (std::size_t b = 0; b < trace.batch; ++b) {
            const double* d = delta.row(b);
            const double* xi = input.row(b);
            for (std::size_t o = 0; o < out; ++o) {
                double* gw = g.weights.row(o);
                const double dv = d[o];
                for (std::size_t i = 0; i < in; ++i) {
                    gw[i] += dv * xi[i];
                }
                g.bias[o] += dv;
            }
        }
        if (trace.mode == ForwardMode::quantized && layer.weight_quant) {
            for (std::size_t k = 0; k < g.weights.v.size(); ++k) {
                g.weights.v[k] = ste_gradient(layer.weights.v[k],
                                              g.weights.v[k],
                                              *layer.weight_quant);
            }
        }

        if (l == 0) break;

        const Tensor2 w = effective_weights(layer, trace.mode);
        Tensor2 next(trace.batch, in);
        for (std::size_t b = 0; b < trace.batch; ++b) {
            const double* d = delta.row(b);
            double* nd = next.row(b);
            for (std::size_t i = 0; i < in; ++i) {
                double acc = 0.0;
                for (std::size_t o = 0; o < out; ++o) {
                    acc += d[o] * w.at(o, i);
                }
                nd[i] = acc;
            }
        }
        const Layer& prev = m.layers[l - 1];
        if (trace.mode == ForwardMode::quantized && prev.act_quant) {
            const Tensor2& pre_quant = trace.relu_outputs[l - 1];
            for (std::size_t k = 0; k < next.v.size(); ++k) {
                next.v[k] =
                    ste_gradient(pre_quant.v[k], next.v[k], *prev.act_quant);
            }
        }
        const Tensor2& z = trace.preacts[l - 1];
        for (std::size_t k = 0; k < next.v.size(); ++k) {
            if (!(z.v[k] > 0.0)) next.v[k] = 0.0;
        }
        delta = std::move(next);
    }
    return grads;
}

void apply_sgd(Model& m, const GradientBuffer& g, double lr) {
    if (g.layers.size() != m.layers.size()) {
        throw DimensionError("apply_sgd: gradient layer count mismatch");
    }
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        sgd_update(m.layers[l].weights, g.layers[l].weights, lr);
        sgd_update(m.layers[l].bias, g.layers[l].bias, lr);
    }
    ++m.revision;
}

double evaluate(const Model& m, const Dataset& data, ForwardMode mode) {
    if (data.size() == 0) {
        throw InputError("evaluate: empty dataset");
    }
    if (static_cast<std::size_t>(data.num_classes) != m.output_width()) {
        throw DimensionError("evaluate: dataset classes do not match model output");
    }
    const Tensor2 x = data.gather_features(data.all_ids());
    const ForwardTrace trace = forward(m, x, mode);
    std::size_t correct = 0;
    for (std::size_t b = 0; b < trace.batch; ++b) {
        const double* p = trace.probs.row(b);
        std::size_t best = 0;
        for (std::size_t c = 1; c < trace.probs.cols; ++c) {
            if (p[c] > p[best]) best = c; // ties keep the lowest index
        }
        if (static_cast<int>(best) == data.samples[b].label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

constexpr char kModelMagic[8] = {'A', 'C', 'S', 'M', 'D', 'L', '0', '1'};

template <class T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
void read_pod(std::ifstream& in, T& value, const std::string& path) {
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw FormatError(path + ": truncated at byte offset " +
                          std::to_string(static_cast<long long>(in.tellg())));
    }
}

void write_quant(std::ofstream& out, const std::optional<QuantConfig>& q) {
    write_pod(out, static_cast<std::uint8_t>(q.has_value()));
    if (!q) return;
    write_pod(out, static_cast<std::int32_t>(q->bits));
    write_pod(out, static_cast<std::uint8_t>(q->is_signed));
    write_pod(out, static_cast<std::int64_t>(q->neg_levels));
    write_pod(out, static_cast<std::int64_t>(q->pos_levels));
    write_pod(out, q->scale);
    write_pod(out, static_cast<std::uint8_t>(q->calibrated));
}

std::optional<QuantConfig> read_quant(std::ifstream& in, const std::string& path) {
    std::uint8_t present = 0;
    read_pod(in, present, path);
    if (!present) return std::nullopt;
    QuantConfig q;
    std::int32_t bits = 0;
    std::uint8_t is_signed = 0, calibrated = 0;
    std::int64_t neg = 0, pos = 0;
    read_pod(in, bits, path);
    read_pod(in, is_signed, path);
    read_pod(in, neg, path);
    read_pod(in, pos, path);
    read_pod(in, q.scale, path);
    read_pod(in, calibrated, path);
    q.bits = bits;
    q.is_signed = is_signed != 0;
    q.neg_levels = neg;
    q.pos_levels = pos;
    q.calibrated = calibrated != 0;
    return q;
}

} // namespace

void save_model(const Model& m, const std::string& path, const std::string& role) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot open file for write: " + path);
    }
    out.write(kModelMagic, sizeof kModelMagic);
    write_pod(out, std::uint32_t{1});
    write_pod(out, static_cast<std::uint32_t>(role.size()));
    out.write(role.data(), static_cast<std::streamsize>(role.size()));
    write_pod(out, m.init_seed);
    write_pod(out, m.revision);
    write_pod(out, static_cast<std::int32_t>(m.quant_spec.weight_bits));
    write_pod(out, static_cast<std::int32_t>(m.quant_spec.activation_bits));
    write_pod(out, static_cast<std::uint8_t>(m.quant_spec.full_precision_first_last));
    write_pod(out, static_cast<std::uint64_t>(m.arch.size()));
    for (std::size_t w : m.arch) {
        write_pod(out, static_cast<std::uint64_t>(w));
    }
    for (const auto& layer : m.layers) {
        write_pod(out, static_cast<std::uint8_t>(layer.relu));
        write_quant(out, layer.weight_quant);
        write_quant(out, layer.act_quant);
        out.write(reinterpret_cast<const char*>(layer.weights.v.data()),
                  static_cast<std::streamsize>(layer.weights.v.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(layer.bias.data()),
                  static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
    }
    if (!out) {
        throw InputError("write failed: " + path);
    }
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open file: " + path);
    }
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
        throw FormatError(path + ": bad magic at byte offset 0");
    }
    std::uint32_t version = 0;
    read_pod(in, version, path);
    if (version != 1) {
        throw FormatError(path + ": unsupported version " +
                          std::to_string(version) + " at byte offset 8");
    }
    std::uint32_t role_len = 0;
    read_pod(in, role_len, path);
    std::string role(role_len, '\0');
    if (role_len > 0) {
        in.read(role.data(), role_len);
        if (!in) {
            throw FormatError(path + ": truncated role string");
        }
    }

    LoadedModel out;
    Model& m = out.model;
    out.role = role;
    read_pod(in, m.init_seed, path);
    read_pod(in, m.revision, path);
    std::int32_t wb = 0, ab = 0;
    std::uint8_t fpfl = 0;
    read_pod(in, wb, path);
    read_pod(in, ab, path);
    read_pod(in, fpfl, path);
    m.quant_spec = QuantSpec{wb, ab, fpfl != 0};
    std::uint64_t arch_len = 0;
    read_pod(in, arch_len, path);
    if (arch_len < 2) {
        throw FormatError(path + ": arch with fewer than 2 widths");
    }
    m.arch.resize(arch_len);
    for (auto& w : m.arch) {
        std::uint64_t v = 0;
        read_pod(in, v, path);
        w = static_cast<std::size_t>(v);
    }
    m.layers.resize(arch_len - 1);
    for (std::size_t l = 0; l + 1 < arch_len; ++l) {
        Layer& layer = m.layers[l];
        std::uint8_t relu = 0;
        read_pod(in, relu, path);
        layer.relu = relu != 0;
        layer.weight_quant = read_quant(in, path);
        layer.act_quant = read_quant(in, path);
        layer.weights = Tensor2(m.arch[l + 1], m.arch[l]);
        in.read(reinterpret_cast<char*>(layer.weights.v.data()),
                static_cast<std::streamsize>(layer.weights.v.size() * sizeof(double)));
        layer.bias.assign(m.arch[l + 1], 0.0);
        in.read(reinterpret_cast<char*>(layer.bias.data()),
                static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
        if (!in) {
            throw FormatError(path + ": truncated layer payload at byte offset " +
                              std::to_string(static_cast<long long>(in.tellg())));
        }
    }
    return out;
}

} // namespace acs
