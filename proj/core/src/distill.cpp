#include "acs/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "acs/errors.hpp"
#include "acs/rng.hpp"

namespace acs {

Model train_teacher(const std::vector<std::size_t>& arch, const Dataset& train,
                    int epochs, double lr, std::size_t batch_size,
                    std::uint64_t seed, const TeacherEpochHook& hook) {
    if (epochs < 0) {
        throw ConfigError("train_teacher: negative epoch count");
    }
    if (!(lr > 0.0)) {
        throw ConfigError("train_teacher: learning rate must be positive");
    }
    if (batch_size == 0) {
        throw ConfigError("train_teacher: batch_size must be positive");
    }
    if (train.size() == 0) {
        throw InputError("train_teacher: empty dataset");
    }
    if (arch.front() != train.feature_dim() ||
        arch.back() != static_cast<std::size_t>(train.num_classes)) {
        throw ConfigError("train_teacher: arch does not match dataset shape");
    }

    Model m = init_model(arch, seed);
    std::vector<std::size_t> ids = train.all_ids();
    for (int epoch = 0; epoch < epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        double loss_sum = 0.0;
        Rng shuffle_rng(split_seed(seed, SeedStream::shuffle_base,
                                   static_cast<std::uint64_t>(epoch)));
        std::sort(ids.begin(), ids.end());
        shuffle_rng.shuffle(ids);
        for (std::size_t lo = 0; lo < ids.size(); lo += batch_size) {
            const std::size_t hi = std::min(lo + batch_size, ids.size());
            const std::vector<std::size_t> batch(ids.begin() + static_cast<long>(lo),
                                                 ids.begin() + static_cast<long>(hi));
            const Tensor2 x = train.gather_features(batch);
            const Tensor2 y = train.gather_labels(batch);
            const ForwardTrace trace = forward(m, x, ForwardMode::full_precision);

            double loss = 0.0;
            for (std::size_t b = 0; b < batch.size(); ++b) {
                for (std::size_t c = 0; c < trace.probs.cols; ++c) {
                    loss -= y.at(b, c) *
                            std::log(std::max(trace.probs.at(b, c), 1e-12));
                }
            }
            loss /= static_cast<double>(batch.size());
            if (!std::isfinite(loss)) {
                throw RunError("train_teacher: loss diverged at epoch " +
                               std::to_string(epoch));
            }
            loss_sum += loss * static_cast<double>(batch.size());

            GradientBuffer g = backward(m, trace, y);
            g.scale(1.0 / static_cast<double>(batch.size()));
            apply_sgd(m, g, lr);
        }
        if (hook) {
            const std::chrono::duration<double> dt =
                std::chrono::steady_clock::now() - epoch_start;
            hook(epoch, loss_sum / static_cast<double>(ids.size()), dt.count(), m);
        }
    }
    return m;
}

double kd_loss(const ProbVector& student, const ProbVector& teacher) {
    if (student.size() != teacher.size()) {
        throw DimensionError("kd_loss: size mismatch " +
                             std::to_string(student.size()) + " vs " +
                             std::to_string(teacher.size()));
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < student.size(); ++i) {
        loss -= teacher[i] * std::log(std::max(student[i], 1e-12));
    }
    return loss;
}

double kd_loss_batch(const Tensor2& student_probs, const Tensor2& teacher_probs) {
    if (!student_probs.same_shape(teacher_probs)) {
        throw DimensionError("kd_loss_batch: shape mismatch");
    }
    if (student_probs.rows == 0) {
        throw DimensionError("kd_loss_batch: empty batch");
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < student_probs.v.size(); ++i) {
        loss -= teacher_probs.v[i] * std::log(std::max(student_probs.v[i], 1e-12));
    }
    return loss / static_cast<double>(student_probs.rows);
}

TeacherCache::TeacherCache(Model teacher, const Dataset& data)
    : teacher_(std::move(teacher)), data_(&data), cache_(data.size()) {
    if (teacher_.layers.empty()) {
        throw StateError("teacher cache: uninitialized teacher");
    }
    if (static_cast<std::size_t>(data.num_classes) != teacher_.output_width()) {
        throw DimensionError("teacher cache: dataset classes do not match teacher");
    }
}

const ProbVector& TeacherCache::predict(std::size_t sample_id) {
    if (sample_id >= cache_.size()) {
        throw InputError("teacher cache: unknown sample id " +
                         std::to_string(sample_id));
    }
    auto& slot = cache_[sample_id];
    if (!slot) {
        slot = predict_one(teacher_, data_->samples[sample_id].features,
                           ForwardMode::full_precision);
        ++forward_count_;
        ++cached_count_;
    }
    return *slot;
}

void TeacherCache::warm_up() {
    std::vector<std::size_t> missing;
    for (std::size_t id = 0; id < cache_.size(); ++id) {
        if (!cache_[id]) missing.push_back(id);
    }
    if (missing.empty()) return;
    const Tensor2 x = data_->gather_features(missing);
    const ForwardTrace trace = forward(teacher_, x, ForwardMode::full_precision);
    std::vector<double> row(trace.probs.cols);
    for (std::size_t r = 0; r < missing.size(); ++r) {
        std::copy(trace.probs.row(r), trace.probs.row(r) + trace.probs.cols,
                  row.begin());
        cache_[missing[r]] = ProbVector(std::vector<double>(row));
    }
    forward_count_ += missing.size();
    cached_count_ += missing.size();
}

} // namespace acs
