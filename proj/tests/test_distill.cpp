#include <cmath>
#include <vector>

#include "doctest.h"

#include "acs/dataset.hpp"
#include "acs/distill.hpp"
#include "acs/errors.hpp"
#include "acs/model.hpp"
#include "acs/tensor.hpp"

using namespace acs;

namespace {

Dataset blob_dataset(std::size_t per_class = 30, std::uint64_t seed = 8) {
    SyntheticSpec spec;
    spec.classes = 3;
    spec.dims = 5;
    spec.per_class = per_class;
    spec.spread = 0.4;
    spec.seed = seed;
    return make_synthetic(spec);
}

} // namespace

TEST_CASE("soft-target loss on a hand example") {
    const ProbVector student{{0.7, 0.3}};
    const ProbVector teacher{{0.6, 0.4}};
    CHECK(kd_loss(student, teacher) ==
          doctest::Approx(0.6955940880936139).epsilon(1e-14));
}

TEST_CASE("soft-target loss equals cross entropy against the teacher") {
    const ProbVector student{{0.2, 0.5, 0.3}};
    const ProbVector teacher{{0.1, 0.6, 0.3}};
    CHECK(kd_loss(student, teacher) ==
          doctest::Approx(cross_entropy(student, teacher)).epsilon(1e-15));
    CHECK_THROWS_AS(kd_loss(student, ProbVector{{0.5, 0.5}}), DimensionError);
}

TEST_CASE("soft-target loss is minimized when distributions agree") {
    const ProbVector teacher{{0.6, 0.3, 0.1}};
    const double at_teacher = kd_loss(teacher, teacher);
    const ProbVector off{{0.3, 0.6, 0.1}};
    CHECK(kd_loss(off, teacher) > at_teacher);
}

TEST_CASE("batch soft-target loss averages the rows") {
    Tensor2 student(2, 2);
    student.v = {0.7, 0.3, 0.5, 0.5};
    Tensor2 teacher(2, 2);
    teacher.v = {0.6, 0.4, 0.5, 0.5};
    const ProbVector s0{{0.7, 0.3}};
    const ProbVector t0{{0.6, 0.4}};
    const ProbVector s1{{0.5, 0.5}};
    const ProbVector t1{{0.5, 0.5}};
    CHECK(kd_loss_batch(student, teacher) ==
          doctest::Approx(0.5 * (kd_loss(s0, t0) + kd_loss(s1, t1)))
              .epsilon(1e-14));
    Tensor2 bad(1, 2);
    CHECK_THROWS_AS(kd_loss_batch(student, bad), DimensionError);
}

TEST_CASE("teacher training is deterministic and learns the blobs") {
    const Dataset d = blob_dataset();
    const Model a = train_teacher({5, 16, 3}, d, 20, 0.1, 16, 3);
    const Model b = train_teacher({5, 16, 3}, d, 20, 0.1, 16, 3);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        CHECK(a.layers[l].weights.v == b.layers[l].weights.v);
    }
    CHECK(evaluate(a, d, ForwardMode::full_precision) > 0.9);

    const Model c = train_teacher({5, 16, 3}, d, 20, 0.1, 16, 4);
    bool diff = false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weights.v != c.layers[l].weights.v) diff = true;
    }
    CHECK(diff);
}

TEST_CASE("teacher training reports each epoch through the hook") {
    const Dataset d = blob_dataset(10);
    std::vector<int> epochs;
    std::vector<double> losses;
    const TeacherEpochHook hook = [&](int epoch, double loss, double secs,
                                      const Model& m) {
        epochs.push_back(epoch);
        losses.push_back(loss);
        CHECK(secs >= 0.0);
        CHECK(m.layers.size() == 2);
    };
    train_teacher({5, 8, 3}, d, 5, 0.05, 8, 1, hook);
    CHECK(epochs == std::vector<int>{0, 1, 2, 3, 4});
    for (double l : losses) {
        CHECK(std::isfinite(l));
        CHECK(l > 0.0);
    }
    CHECK(losses.back() < losses.front());
}

TEST_CASE("teacher training validates its arguments") {
    const Dataset d = blob_dataset(5);
    CHECK_THROWS_AS(train_teacher({5, 8, 3}, d, -1, 0.1, 8, 1), ConfigError);
    CHECK_THROWS_AS(train_teacher({5, 8, 3}, d, 5, -0.1, 8, 1), ConfigError);
    CHECK_THROWS_AS(train_teacher({5, 8, 3}, d, 5, 0.1, 0, 1), ConfigError);
    CHECK_THROWS_AS(train_teacher({4, 8, 3}, d, 5, 0.1, 8, 1), ConfigError);
    CHECK_THROWS_AS(train_teacher({5, 8, 2}, d, 5, 0.1, 8, 1), ConfigError);
}

TEST_CASE("diverging teacher training aborts with a run error") {
    Dataset d = blob_dataset(10);
    for (auto& s : d.samples) {
        for (auto& f : s.features) f *= 1e150;
    }
    CHECK_THROWS_AS(train_teacher({5, 8, 3}, d, 3, 1e200, 8, 1), RunError);
}

TEST_CASE("teacher cache memoizes per-sample predictions") {
    const Dataset d = blob_dataset(10);
    Model teacher = train_teacher({5, 8, 3}, d, 5, 0.1, 8, 2);
    const Model reference = teacher;
    TeacherCache cache(std::move(teacher), d);
    CHECK(cache.forward_count() == 0);
    CHECK(cache.cached_count() == 0);

    const ProbVector& p = cache.predict(4);
    CHECK(cache.forward_count() == 1);
    const ProbVector direct = predict_one(reference, d.samples[4].features,
                                          ForwardMode::full_precision);
    for (std::size_t c = 0; c < p.size(); ++c) {
        CHECK(p[c] == direct[c]);
    }

    cache.predict(4);
    cache.predict(4);
    CHECK(cache.forward_count() == 1);
    CHECK(cache.cached_count() == 1);

    cache.warm_up();
    CHECK(cache.forward_count() == d.size());
    CHECK(cache.cached_count() == d.size());
    cache.warm_up();
    CHECK(cache.forward_count() == d.size());

    CHECK_THROWS_AS(cache.predict(d.size()), InputError);
}
