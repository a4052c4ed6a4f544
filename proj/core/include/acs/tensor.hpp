#pragma once

#include <cstddef>
#include <vector>

namespace acs {

// Dense row-major 2-D array of doubles.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), v(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }

    double* row(std::size_t r) { return v.data() + r * cols; }
    const double* row(std::size_t r) const { return v.data() + r * cols; }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor2& o) const {
        return rows == o.rows && cols == o.cols;
    }
};

// Discrete distribution over classes. Construction validates that entries
// are non-negative and sum to 1 within 1e-9.
class ProbVector {
public:
    ProbVector() = default;
    explicit ProbVector(std::vector<double> entries);

    std::size_t size() const { return v_.size(); }
    double operator[](std::size_t i) const { return v_[i]; }
    const std::vector<double>& data() const { return v_; }

    auto begin() const { return v_.begin(); }
    auto end() const { return v_.end(); }

private:
    std::vector<double> v_;
};

ProbVector one_hot(std::size_t num_classes, std::size_t index);

// Per-layer gradient storage, shape-congruent with the parameters it was
// produced from.
struct LayerGrad {
    Tensor2 weights;
    std::vector<double> bias;
};

struct GradientBuffer {
    std::vector<LayerGrad> layers;

    double squared_norm() const;
    void scale(double factor);
    // Elementwise accumulate; shapes must match.
    void add(const GradientBuffer& other);
};

// Numerically stable softmax (max subtraction before exponentiation).
ProbVector softmax(const std::vector<double>& logits);

// -sum(target_i * log(max(p_i, 1e-12))). Supports one-hot and soft targets.
double cross_entropy(const ProbVector& p, const ProbVector& target);

// Gradient of cross_entropy(softmax(z), target) with respect to z: p - target.
std::vector<double> ce_logit_gradient(const ProbVector& p, const ProbVector& target);

// In-place w <- w - lr * g.
void sgd_update(Tensor2& w, const Tensor2& g, double lr);
void sgd_update(std::vector<double>& w, const std::vector<double>& g, double lr);

} // namespace acs
