#pragma once

#include <span>

namespace acs {

// Uniform quantizer description. neg_levels / pos_levels are the clip
// bounds of the integer grid: a signed b-bit grid spans
// [-2^(b-1), 2^(b-1)-1], an unsigned one [0, 2^b - 1].
struct QuantConfig {
    int bits = 0;
    bool is_signed = false;
    long long neg_levels = 0;
    long long pos_levels = 0;
    double scale = 0.0;
    bool calibrated = false;
};

// Validates the width and fills in the grid bounds. Signed 1-bit is
// rejected: its positive bound collapses to zero and every value would
// quantize into {-s, 0}.
QuantConfig make_quant_config(int bits, bool is_signed);

// Symmetric max-abs calibration: scale = max|v| / max(neg, pos) with a
// floor of 1e-8 so all-zero inputs stay usable.
QuantConfig calibrate_scale(std::span<const double> values, QuantConfig cfg);

// Fake quantization: scale * round_to_grid(clip(v / scale)). Ties round
// half to even.
double quantize(double v, const QuantConfig& cfg);

// Straight-through estimator: the upstream gradient passes through
// unchanged while v/scale lies inside the clip range (bounds inclusive)
// and is zeroed outside it.
double ste_gradient(double v_real, double upstream, const QuantConfig& cfg);

// Nearest integer, ties to even. Independent of the FPU rounding mode.
double round_half_even(double x);

} // namespace acs
