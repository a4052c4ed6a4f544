#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "acs/model.hpp"
#include "acs/scoring.hpp"
#include "acs/selection.hpp"
#include "acs/tensor.hpp"

namespace testutil {

// Summed cross entropy over the batch, matching the loss whose gradient
// backward() reports.
inline double batch_ce_loss(const acs::Model& m, const acs::Tensor2& x,
                            const acs::Tensor2& targets, acs::ForwardMode mode) {
    const acs::ForwardTrace trace = acs::forward(m, x, mode);
    double loss = 0.0;
    for (std::size_t i = 0; i < targets.v.size(); ++i) {
        loss -= targets.v[i] * std::log(std::max(trace.probs.v[i], 1e-12));
    }
    return loss;
}

// Central-difference check of every weight and bias gradient. Returns the
// worst relative error, with a floor in the denominator so near-zero
// gradients compare absolutely.
inline double max_rel_grad_error(acs::Model m, const acs::Tensor2& x,
                                 const acs::Tensor2& targets,
                                 acs::ForwardMode mode, double h = 1e-5) {
    const acs::ForwardTrace trace = acs::forward(m, x, mode);
    const acs::GradientBuffer analytic = acs::backward(m, trace, targets);

    double worst = 0.0;
    const auto probe = [&](double& slot, double analytic_g) {
        const double saved = slot;
        slot = saved + h;
        const double up = batch_ce_loss(m, x, targets, mode);
        slot = saved - h;
        const double down = batch_ce_loss(m, x, targets, mode);
        slot = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom =
            std::max({1e-4, std::fabs(analytic_g), std::fabs(fd)});
        worst = std::max(worst, std::fabs(analytic_g - fd) / denom);
    };

    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto& layer = m.layers[l];
        for (std::size_t i = 0; i < layer.weights.v.size(); ++i) {
            probe(layer.weights.v[i], analytic.layers[l].weights.v[i]);
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            probe(layer.bias[i], analytic.layers[l].bias[i]);
        }
    }
    return worst;
}

// Reference top-k: full stable sort by (score desc, id asc), first k ids.
inline std::vector<std::size_t> brute_force_topk(
    const std::vector<acs::ScoreRecord>& scores, std::size_t k) {
    std::vector<acs::ScoreRecord> sorted = scores;
    std::sort(sorted.begin(), sorted.end(),
              [](const acs::ScoreRecord& a, const acs::ScoreRecord& b) {
                  if (a.combined != b.combined) return a.combined > b.combined;
                  return a.sample_id < b.sample_id;
              });
    std::vector<std::size_t> ids;
    ids.reserve(k);
    for (std::size_t i = 0; i < k && i < sorted.size(); ++i) {
        ids.push_back(sorted[i].sample_id);
    }
    return ids;
}

// Ranks with ties assigned the average of the positions they span.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

inline double spearman(const std::vector<double>& a,
                       const std::vector<double>& b) {
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const auto n = static_cast<double>(a.size());
    double mean_a = 0.0;
    double mean_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += ra[i];
        mean_b += rb[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0;
    double var_a = 0.0;
    double var_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = ra[i] - mean_a;
        const double db = rb[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) return 0.0;
    return cov / std::sqrt(var_a * var_b);
}

// Scratch directory removed on scope exit.
class TempDir {
  public:
    TempDir() {
        const auto base = std::filesystem::temp_directory_path();
        for (int attempt = 0; attempt < 100; ++attempt) {
            auto candidate =
                base / ("acs_test_" + std::to_string(std::rand()) + "_" +
                        std::to_string(attempt));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        std::abort();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const {
        return (path_ / name).string();
    }
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

} // namespace testutil
