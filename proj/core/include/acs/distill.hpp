#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "acs/dataset.hpp"
#include "acs/model.hpp"
#include "acs/tensor.hpp"

namespace acs {

// Observer invoked after each completed teacher epoch with the epoch
// index, its mean loss, its wall time and the model state.
using TeacherEpochHook =
    std::function<void(int, double, double, const Model&)>;

// Trains a full-precision network on hard labels with plain SGD and a
// seeded per-epoch shuffle. Used to produce the distillation teacher.
Model train_teacher(const std::vector<std::size_t>& arch, const Dataset& train,
                    int epochs, double lr, std::size_t batch_size,
                    std::uint64_t seed, const TeacherEpochHook& hook = {});

// Distillation loss for one sample: cross entropy of the student
// distribution against the teacher distribution.
double kd_loss(const ProbVector& student, const ProbVector& teacher);

// Batch variant, averaged over samples.
double kd_loss_batch(const Tensor2& student_probs, const Tensor2& teacher_probs);

// Memoizes full-precision teacher predictions per sample id so each
// sample costs at most one teacher forward per run. The teacher and the
// dataset are frozen for the cache's lifetime.
class TeacherCache {
public:
    TeacherCache(Model teacher, const Dataset& data);

    const ProbVector& predict(std::size_t sample_id);
    // Computes every missing entry in one pass.
    void warm_up();

    // Number of samples that have gone through the teacher network.
    std::size_t forward_count() const { return forward_count_; }
    std::size_t cached_count() const { return cached_count_; }
    const Model& teacher() const { return teacher_; }

private:
    Model teacher_;
    const Dataset* data_;
    std::vector<std::optional<ProbVector>> cache_;
    std::size_t forward_count_ = 0;
    std::size_t cached_count_ = 0;
};

} // namespace acs
