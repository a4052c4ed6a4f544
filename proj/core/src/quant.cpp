#include "acs/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "acs/errors.hpp"

namespace acs {

namespace {
constexpr double kScaleFloor = 1e-8;
constexpr int kMaxBits = 30;
} // namespace

QuantConfig make_quant_config(int bits, bool is_signed) {
    if (bits < 1 || bits > kMaxBits) {
        throw ConfigError("quant config: bits=" + std::to_string(bits) +
                          " outside [1, " + std::to_string(kMaxBits) + "]");
    }
    if (is_signed && bits == 1) {
        throw ConfigError("quant config: signed 1-bit grid has no positive level");
    }
    QuantConfig cfg;
    cfg.bits = bits;
    cfg.is_signed = is_signed;
    if (is_signed) {
        cfg.neg_levels = 1LL << (bits - 1);
        cfg.pos_levels = (1LL << (bits - 1)) - 1;
    } else {
        cfg.neg_levels = 0;
        cfg.pos_levels = (1LL << bits) - 1;
    }
    return cfg;
}

QuantConfig calibrate_scale(std::span<const double> values, QuantConfig cfg) {
    if (cfg.bits == 0) {
        throw StateError("calibrate_scale: config not initialized");
    }
    double max_abs = 0.0;
    for (double v : values) {
        max_abs = std::max(max_abs, std::fabs(v));
    }
    const double denom = static_cast<double>(std::max(cfg.neg_levels, cfg.pos_levels));
    cfg.scale = std::max(max_abs / denom, kScaleFloor);
    cfg.calibrated = true;
    return cfg;
}

double round_half_even(double x) {
    const double floor_x = std::floor(x);
    const double frac = x - floor_x;
    if (frac > 0.5) return floor_x + 1.0;
    if (frac < 0.5) return floor_x;
    // Exactly halfway: pick the even neighbour.
    return (std::fmod(floor_x, 2.0) == 0.0) ? floor_x : floor_x + 1.0;
}

double quantize(double v, const QuantConfig& cfg) {
    if (!cfg.calibrated) {
        throw StateError("quantize: scale not calibrated");
    }
    const double lo = -static_cast<double>(cfg.neg_levels);
    const double hi = static_cast<double>(cfg.pos_levels);
    const double clipped = std::clamp(v / cfg.scale, lo, hi);
    return cfg.scale * round_half_even(clipped);
}

double ste_gradient(double v_real, double upstream, const QuantConfig& cfg) {
    if (!cfg.calibrated) {
        throw StateError("ste_gradient: scale not calibrated");
    }
    const double r = v_real / cfg.scale;
    const bool inside = r >= -static_cast<double>(cfg.neg_levels) &&
                        r <= static_cast<double>(cfg.pos_levels);
    return inside ? upstream : 0.0;
}

} // namespace acs
