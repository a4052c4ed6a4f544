#include <benchmark/benchmark.h>

#include <vector>

#include "acs/dataset.hpp"
#include "acs/model.hpp"
#include "acs/quant.hpp"
#include "acs/rng.hpp"
#include "acs/scoring.hpp"
#include "acs/selection.hpp"

namespace {

acs::Dataset bench_dataset(std::size_t per_class) {
    acs::SyntheticSpec spec;
    spec.classes = 4;
    spec.dims = 16;
    spec.per_class = per_class;
    spec.spread = 0.5;
    spec.seed = 7;
    return acs::make_synthetic(spec);
}

acs::Model bench_model() {
    acs::Model m = acs::init_model({16, 64, 64, 4}, 11);
    acs::configure_quantization(m, acs::QuantSpec{2, 32, true});
    acs::calibrate_weight_scales(m);
    return m;
}

void BM_quantize(benchmark::State& state) {
    const auto cfg = [] {
        std::vector<double> v(4096);
        acs::Rng rng(3);
        for (auto& x : v) x = rng.gaussian();
        return acs::calibrate_scale(v, acs::make_quant_config(4, true));
    }();
    acs::Rng rng(5);
    std::vector<double> values(4096);
    for (auto& v : values) v = rng.gaussian();
    for (auto _ : state) {
        double acc = 0.0;
        for (double v : values) acc += acs::quantize(v, cfg);
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 4096);
}
BENCHMARK(BM_quantize);

void BM_forward_batch(benchmark::State& state) {
    const acs::Model m = bench_model();
    const acs::Dataset d = bench_dataset(64);
    const acs::Tensor2 x = d.gather_features(d.all_ids());
    for (auto _ : state) {
        const acs::ForwardTrace t =
            acs::forward(m, x, acs::ForwardMode::quantized);
        benchmark::DoNotOptimize(t.probs.v.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(x.rows));
}
BENCHMARK(BM_forward_batch);

void BM_score_dataset(benchmark::State& state) {
    const acs::Model m = bench_model();
    const acs::Dataset d = bench_dataset(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        const auto scores = acs::score_dataset(m, d, 0, 1.0, {});
        benchmark::DoNotOptimize(scores.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(d.size()));
}
BENCHMARK(BM_score_dataset)->Arg(64)->Arg(256);

void BM_select_topk(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<acs::ScoreRecord> records(n);
    acs::Rng rng(17);
    for (std::size_t i = 0; i < n; ++i) {
        records[i].sample_id = i;
        records[i].epoch = 0;
        records[i].evs = rng.uniform();
        records[i].ds = rng.uniform();
        records[i].combined = rng.uniform();
    }
    for (auto _ : state) {
        const acs::Coreset c = acs::select_topk(records, 0.3, 0, "acs", 1);
        benchmark::DoNotOptimize(c.member_ids.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n));
}
BENCHMARK(BM_select_topk)->Arg(1000)->Arg(10000);

} // namespace

BENCHMARK_MAIN();
