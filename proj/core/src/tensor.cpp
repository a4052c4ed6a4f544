#include "acs/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "acs/errors.hpp"

namespace acs {

namespace {
constexpr double kLogClamp = 1e-12;
constexpr double kProbSumTol = 1e-9;
} // namespace

ProbVector::ProbVector(std::vector<double> entries) : v_(std::move(entries)) {
    if (v_.empty()) {
        throw DimensionError("prob vector: empty");
    }
    double sum = 0.0;
    for (double x : v_) {
        if (!(x >= 0.0)) {
            throw InputError("prob vector: negative entry " + std::to_string(x));
        }
        sum += x;
    }
    if (std::fabs(sum - 1.0) > kProbSumTol) {
        throw InputError("prob vector: entries sum to " + std::to_string(sum) +
                         ", expected 1");
    }
}

ProbVector one_hot(std::size_t num_classes, std::size_t index) {
    if (num_classes == 0) {
        throw DimensionError("one_hot: zero classes");
    }
    if (index >= num_classes) {
        throw InputError("one_hot: index " + std::to_string(index) +
                         " out of range for " + std::to_string(num_classes) +
                         " classes");
    }
    std::vector<double> v(num_classes, 0.0);
    v[index] = 1.0;
    return ProbVector(std::move(v));
}

double GradientBuffer::squared_norm() const {
    double acc = 0.0;
    for (const auto& l : layers) {
        for (double x : l.weights.v) acc += x * x;
        for (double x : l.bias) acc += x * x;
    }
    return acc;
}

void GradientBuffer::scale(double factor) {
    for (auto& l : layers) {
        for (double& x : l.weights.v) x *= factor;
        for (double& x : l.bias) x *= factor;
    }
}

void GradientBuffer::add(const GradientBuffer& other) {
    if (layers.size() != other.layers.size()) {
        throw DimensionError("gradient add: layer count mismatch");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& a = layers[i];
        const auto& b = other.layers[i];
        if (!a.weights.same_shape(b.weights) || a.bias.size() != b.bias.size()) {
            throw DimensionError("gradient add: shape mismatch at layer " +
                                 std::to_string(i));
        }
        for (std::size_t k = 0; k < a.weights.v.size(); ++k) {
            a.weights.v[k] += b.weights.v[k];
        }
        for (std::size_t k = 0; k < a.bias.size(); ++k) {
            a.bias[k] += b.bias[k];
        }
    }
}

ProbVector softmax(const std::vector<double>& logits) {
    if (logits.empty()) {
        throw DimensionError("softmax: empty logits");
    }
    for (double x : logits) {
        if (!std::isfinite(x)) {
            throw RunError("softmax: non-finite logit, training diverged");
        }
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> e(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        e[i] = std::exp(logits[i] - m);
        sum += e[i];
    }
    for (double& x : e) x /= sum;
    return ProbVector(std::move(e));
}

double cross_entropy(const ProbVector& p, const ProbVector& target) {
    if (p.size() != target.size()) {
        throw DimensionError("cross_entropy: size mismatch " +
                             std::to_string(p.size()) + " vs " +
                             std::to_string(target.size()));
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        loss -= target[i] * std::log(std::max(p[i], kLogClamp));
    }
    return loss;
}

std::vector<double> ce_logit_gradient(const ProbVector& p, const ProbVector& target) {
    if (p.size() != target.size()) {
        throw DimensionError("ce_logit_gradient: size mismatch " +
                             std::to_string(p.size()) + " vs " +
                             std::to_string(target.size()));
    }
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        g[i] = p[i] - target[i];
    }
    return g;
}

void sgd_update(Tensor2& w, const Tensor2& g, double lr) {
    if (!w.same_shape(g)) {
        throw DimensionError("sgd_update: weight/gradient shape mismatch");
    }
    for (std::size_t i = 0; i < w.v.size(); ++i) {
        w.v[i] -= lr * g.v[i];
    }
}

void sgd_update(std::vector<double>& w, const std::vector<double>& g, double lr) {
    if (w.size() != g.size()) {
        throw DimensionError("sgd_update: bias/gradient size mismatch");
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] -= lr * g[i];
    }
}

} // namespace acs
