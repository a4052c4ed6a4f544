#include "acs/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "acs/csv.hpp"
#include "acs/errors.hpp"
#include "acs/rng.hpp"

namespace acs {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("config: unknown field '" + where + key + "'");
        }
    }
}

DataConfig parse_data_config(const json& j) {
    reject_unknown_keys(j,
                        {"kind", "classes", "dims", "per_class", "spread", "seed",
                         "test_fraction", "train_images", "train_labels",
                         "test_images", "test_labels", "train_batches",
                         "test_batches", "train_path", "test_path"},
                        "data.");
    DataConfig d;
    d.kind = j.value("kind", d.kind);
    d.synthetic.classes = j.value("classes", d.synthetic.classes);
    d.synthetic.dims = j.value("dims", d.synthetic.dims);
    d.synthetic.per_class = j.value("per_class", d.synthetic.per_class);
    d.synthetic.spread = j.value("spread", d.synthetic.spread);
    if (j.contains("seed")) {
        d.synthetic.seed = j.at("seed").get<std::uint64_t>();
        d.synthetic_seed_set = true;
    }
    d.test_fraction = j.value("test_fraction", d.test_fraction);
    d.train_images = j.value("train_images", "");
    d.train_labels = j.value("train_labels", "");
    d.test_images = j.value("test_images", "");
    d.test_labels = j.value("test_labels", "");
    d.train_batches = j.value("train_batches", std::vector<std::string>{});
    d.test_batches = j.value("test_batches", std::vector<std::string>{});
    d.train_path = j.value("train_path", "");
    d.test_path = j.value("test_path", "");
    return d;
}

} // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open config: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path + ": invalid JSON: " + e.what());
    }
    try {
        reject_unknown_keys(
            j, {"data", "arch", "weight_bits", "activation_bits",
                "full_precision_first_last", "epochs", "interval", "fraction",
                "annealing", "selector", "kd", "kd_lambda", "lr", "batch_size",
                "noise", "seed", "out_dir", "teacher", "recalibrate_every",
                "max_steps", "early_epochs", "import_coreset"},
            "");
        RunConfig cfg;
        if (j.contains("data")) {
            cfg.data = parse_data_config(j.at("data"));
        }
        cfg.arch = j.value("arch", cfg.arch);
        cfg.weight_bits = j.value("weight_bits", cfg.weight_bits);
        cfg.activation_bits = j.value("activation_bits", cfg.activation_bits);
        cfg.full_precision_first_last =
            j.value("full_precision_first_last", cfg.full_precision_first_last);
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.interval = j.value("interval", cfg.interval);
        cfg.fraction = j.value("fraction", cfg.fraction);
        if (j.contains("annealing")) {
            cfg.annealing = annealing_from_string(j.at("annealing").get<std::string>());
        }
        if (j.contains("selector")) {
            cfg.selector = selector_from_string(j.at("selector").get<std::string>());
        }
        cfg.kd = j.value("kd", cfg.kd);
        cfg.kd_lambda = j.value("kd_lambda", cfg.kd_lambda);
        cfg.lr = j.value("lr", cfg.lr);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.noise = j.value("noise", cfg.noise);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
        if (j.contains("teacher")) {
            const json& t = j.at("teacher");
            reject_unknown_keys(t, {"arch", "epochs", "lr"}, "teacher.");
            cfg.teacher.arch = t.value("arch", cfg.teacher.arch);
            cfg.teacher.epochs = t.value("epochs", cfg.teacher.epochs);
            cfg.teacher.lr = t.value("lr", cfg.teacher.lr);
        }
        cfg.recalibrate_every = j.value("recalibrate_every", cfg.recalibrate_every);
        cfg.max_steps = j.value("max_steps", cfg.max_steps);
        cfg.early_epochs = j.value("early_epochs", cfg.early_epochs);
        cfg.import_coreset = j.value("import_coreset", cfg.import_coreset);
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void validate_run_config(const RunConfig& cfg) {
    if (cfg.arch.size() < 2) {
        throw ConfigError("config: arch needs at least input and output widths");
    }
    if (cfg.epochs < 1) {
        throw ConfigError("config: epochs must be positive");
    }
    if (cfg.interval < 1 || cfg.interval > cfg.epochs) {
        throw ConfigError("config: interval must lie in [1, epochs]");
    }
    if (!(cfg.fraction > 0.0 && cfg.fraction <= 1.0)) {
        throw ConfigError("config: fraction must lie in (0, 1]");
    }
    if (!(cfg.lr > 0.0)) {
        throw ConfigError("config: lr must be positive");
    }
    if (cfg.batch_size == 0) {
        throw ConfigError("config: batch_size must be positive");
    }
    if (!(cfg.noise >= 0.0 && cfg.noise < 1.0)) {
        throw ConfigError("config: noise must lie in [0, 1)");
    }
    if (!(cfg.kd_lambda >= 0.0 && cfg.kd_lambda <= 1.0)) {
        throw ConfigError("config: kd_lambda must lie in [0, 1]");
    }
    if (cfg.recalibrate_every < 0) {
        throw ConfigError("config: recalibrate_every must be non-negative");
    }
    if (cfg.max_steps < 0) {
        throw ConfigError("config: max_steps must be non-negative");
    }
    if (cfg.early_epochs < 1) {
        throw ConfigError("config: early_epochs must be positive");
    }
    if (cfg.teacher.epochs < 0) {
        throw ConfigError("config: teacher.epochs must be non-negative");
    }
    if (!(cfg.teacher.lr > 0.0)) {
        throw ConfigError("config: teacher.lr must be positive");
    }
    if (cfg.selector == SelectorKind::imported && cfg.import_coreset.empty()) {
        throw ConfigError("config: selector 'imported' needs import_coreset");
    }
    const std::string kind = cfg.data.kind;
    if (kind != "synthetic" && kind != "idx" && kind != "cifar10" &&
        kind != "native") {
        throw ConfigError("config: unknown data.kind '" + kind + "'");
    }
    if (kind == "idx" && (cfg.data.train_images.empty() ||
                          cfg.data.train_labels.empty() ||
                          cfg.data.test_images.empty() ||
                          cfg.data.test_labels.empty())) {
        throw ConfigError("config: idx data needs train/test image and label paths");
    }
    if (kind == "cifar10" &&
        (cfg.data.train_batches.empty() || cfg.data.test_batches.empty())) {
        throw ConfigError("config: cifar10 data needs train_batches and test_batches");
    }
    if (kind == "native" &&
        (cfg.data.train_path.empty() || cfg.data.test_path.empty())) {
        throw ConfigError("config: native data needs train_path and test_path");
    }
    if (kind == "synthetic" &&
        !(cfg.data.test_fraction > 0.0 && cfg.data.test_fraction < 1.0)) {
        throw ConfigError("config: data.test_fraction must lie in (0, 1)");
    }
    // Without distillation there is no teacher distribution, so any
    // schedule that weights the disagreement term is unsatisfiable.
    // run_qat downgrades such configs to evs_only; reject only the
    // explicit contradiction of asking for the pure disagreement score.
    if (!cfg.kd && cfg.selector == SelectorKind::acs &&
        cfg.annealing == AnnealingStrategy::ds_only) {
        throw ConfigError("config: ds_only scoring requires kd");
    }
}

TimingBreakdown timing_breakdown(const MetricsLog& log) {
    TimingBreakdown t;
    for (const auto& row : log.rows) {
        t.selection_s += row.selection_time_s;
        t.training_s += row.training_time_s;
    }
    t.total_s = log.total_time_s;
    return t;
}

void write_metrics_csv(const std::string& path, const MetricsLog& log) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open file for write: " + path);
    }
    out << "epoch,phase,train_loss,train_acc,test_acc,coreset_size\n";
    for (const auto& r : log.rows) {
        out << r.epoch << ',' << r.phase << ',' << format_double(r.train_loss)
            << ',' << format_double(r.train_acc) << ','
            << format_double(r.test_acc) << ',' << r.coreset_size << '\n';
    }
    if (!out) {
        throw InputError("write failed: " + path);
    }
}

void write_timing_csv(const std::string& path, const MetricsLog& log) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open file for write: " + path);
    }
    out << "epoch,phase,selection_time_s,training_time_s\n";
    for (const auto& r : log.rows) {
        out << r.epoch << ',' << r.phase << ','
            << format_double(r.selection_time_s) << ','
            << format_double(r.training_time_s) << '\n';
    }
    out << "total,," << format_double(log.total_time_s) << ",\n";
    if (!out) {
        throw InputError("write failed: " + path);
    }
}

namespace {

struct PreparedData {
    Dataset train;
    Dataset test;
    std::uint64_t synthetic_seed = 0;
    bool synthetic = false;
};

PreparedData prepare_data(const RunConfig& cfg) {
    PreparedData out;
    const DataConfig& d = cfg.data;
    if (d.kind == "synthetic") {
        SyntheticSpec spec = d.synthetic;
        if (!d.synthetic_seed_set) {
            spec.seed = split_seed(cfg.seed, SeedStream::data_gen);
        }
        const Dataset pool = make_synthetic(spec);
        auto halves = split_train_test(
            pool, d.test_fraction, split_seed(cfg.seed, SeedStream::test_split));
        out.train = std::move(halves.first);
        out.test = std::move(halves.second);
        out.synthetic_seed = spec.seed;
        out.synthetic = true;
    } else if (d.kind == "idx") {
        out.train = load_idx(d.train_images, d.train_labels);
        out.test = load_idx(d.test_images, d.test_labels);
    } else if (d.kind == "cifar10") {
        out.train = load_cifar10(d.train_batches);
        out.test = load_cifar10(d.test_batches);
    } else if (d.kind == "native") {
        out.train = load_dataset_file(d.train_path);
        out.test = load_dataset_file(d.test_path);
    } else {
        throw ConfigError("config: unknown data.kind '" + d.kind + "'");
    }
    out.train.validate();
    out.test.validate();
    if (out.train.size() == 0 || out.test.size() == 0) {
        throw InputError("data: train and test sets must be non-empty");
    }
    if (out.train.num_classes != out.test.num_classes ||
        out.train.feature_dim() != out.test.feature_dim()) {
        throw InputError("data: train and test sets disagree on shape");
    }
    return out;
}

// Early-training probe shared by the el2n and forgetting baselines: a
// fresh model of the student architecture trained on hard labels for a
// handful of epochs over the full training set.
struct ProbeOutcome {
    std::vector<double> scores;              // final per-sample evs
    std::vector<std::size_t> forget_events;  // per-sample forgetting counts
};

ProbeOutcome run_early_probe(const RunConfig& cfg, const Dataset& train,
                             const QuantSpec& qspec) {
    const std::uint64_t probe_seed = split_seed(cfg.seed, SeedStream::early_model);
    Model probe = init_model(cfg.arch, probe_seed);
    configure_quantization(probe, qspec);
    calibrate_weight_scales(probe);
    if (cfg.activation_bits < 32) {
        calibrate_activation_scales(probe, train.gather_features(train.all_ids()));
    }

    ForgettingLedger ledger;
    std::vector<std::size_t> ids = train.all_ids();
    const Tensor2 all_x = train.gather_features(ids);
    for (int epoch = 0; epoch < cfg.early_epochs; ++epoch) {
        Rng shuffle_rng(split_seed(probe_seed, SeedStream::shuffle_base,
                                   static_cast<std::uint64_t>(epoch)));
        std::sort(ids.begin(), ids.end());
        shuffle_rng.shuffle(ids);
        for (std::size_t lo = 0; lo < ids.size(); lo += cfg.batch_size) {
            const std::size_t hi = std::min(lo + cfg.batch_size, ids.size());
            const std::vector<std::size_t> batch(
                ids.begin() + static_cast<long>(lo),
                ids.begin() + static_cast<long>(hi));
            const Tensor2 x = train.gather_features(batch);
            const Tensor2 y = train.gather_labels(batch);
            const ForwardTrace trace = forward(probe, x, ForwardMode::quantized);
            GradientBuffer g = backward(probe, trace, y);
            g.scale(1.0 / static_cast<double>(batch.size()));
            apply_sgd(probe, g, cfg.lr);
        }
        const ForwardTrace snap = forward(probe, all_x, ForwardMode::quantized);
        std::vector<bool> correct(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) {
            const double* p = snap.probs.row(i);
            std::size_t best = 0;
            for (std::size_t c = 1; c < snap.probs.cols; ++c) {
                if (p[c] > p[best]) best = c;
            }
            correct[i] = static_cast<int>(best) == train.samples[i].label;
        }
        ledger.update(correct);
    }

    ProbeOutcome out;
    const auto records = score_dataset(probe, train, cfg.early_epochs, 1.0, {});
    out.scores.resize(train.size());
    for (const auto& r : records) {
        out.scores[r.sample_id] = r.evs;
    }
    out.forget_events = ledger.events();
    return out;
}

ordered_json quantizer_json(const Model& m) {
    ordered_json layers = ordered_json::array();
    for (const auto& layer : m.layers) {
        ordered_json entry;
        if (layer.weight_quant) {
            entry["weight"] = {{"bits", layer.weight_quant->bits},
                               {"signed", layer.weight_quant->is_signed},
                               {"scale", layer.weight_quant->scale}};
        } else {
            entry["weight"] = nullptr;
        }
        if (layer.act_quant) {
            entry["activation"] = {{"bits", layer.act_quant->bits},
                                   {"signed", layer.act_quant->is_signed},
                                   {"scale", layer.act_quant->scale}};
        } else {
            entry["activation"] = nullptr;
        }
        layers.push_back(entry);
    }
    return layers;
}

void write_effective_config(const RunConfig& cfg, const PreparedData& data,
                            int epochs_effective,
                            const std::vector<std::size_t>& teacher_arch,
                            const Model& student, const std::string& path) {
    ordered_json j;
    ordered_json jd;
    jd["kind"] = cfg.data.kind;
    if (cfg.data.kind == "synthetic") {
        jd["classes"] = cfg.data.synthetic.classes;
        jd["dims"] = cfg.data.synthetic.dims;
        jd["per_class"] = cfg.data.synthetic.per_class;
        jd["spread"] = cfg.data.synthetic.spread;
        jd["seed"] = data.synthetic_seed;
        jd["test_fraction"] = cfg.data.test_fraction;
    } else if (cfg.data.kind == "idx") {
        jd["train_images"] = cfg.data.train_images;
        jd["train_labels"] = cfg.data.train_labels;
        jd["test_images"] = cfg.data.test_images;
        jd["test_labels"] = cfg.data.test_labels;
    } else if (cfg.data.kind == "cifar10") {
        jd["train_batches"] = cfg.data.train_batches;
        jd["test_batches"] = cfg.data.test_batches;
    } else {
        jd["train_path"] = cfg.data.train_path;
        jd["test_path"] = cfg.data.test_path;
    }
    j["data"] = jd;
    j["arch"] = cfg.arch;
    j["quantization"] = {{"weight_bits", cfg.weight_bits},
                         {"activation_bits", cfg.activation_bits},
                         {"signed", true},
                         {"full_precision_first_last",
                          cfg.full_precision_first_last},
                         {"layers", quantizer_json(student)}};
    j["epochs"] = cfg.epochs;
    j["epochs_effective"] = epochs_effective;
    j["interval"] = cfg.interval;
    j["fraction"] = cfg.fraction;
    j["annealing"] = to_string(cfg.annealing);
    j["selector"] = to_string(cfg.selector);
    j["kd"] = cfg.kd;
    j["kd_lambda"] = cfg.kd_lambda;
    j["lr"] = cfg.lr;
    j["batch_size"] = cfg.batch_size;
    j["noise"] = cfg.noise;
    j["seed"] = cfg.seed;
    j["teacher"] = {{"arch", teacher_arch},
                    {"epochs", cfg.teacher.epochs},
                    {"lr", cfg.teacher.lr}};
    j["recalibrate_every"] = cfg.recalibrate_every;
    j["max_steps"] = cfg.max_steps;
    j["early_epochs"] = cfg.early_epochs;
    if (!cfg.import_coreset.empty()) {
        j["import_coreset"] = cfg.import_coreset;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open file for write: " + path);
    }
    out << j.dump(2) << "\n";
}

} // namespace

RunResult run_qat(const RunConfig& input_cfg) {
    RunConfig cfg = input_cfg;
    validate_run_config(cfg);
    // Disagreement scores need a teacher; without distillation the run
    // falls back to pure label-error scoring.
    if (!cfg.kd && cfg.selector == SelectorKind::acs &&
        cfg.annealing != AnnealingStrategy::evs_only) {
        cfg.annealing = AnnealingStrategy::evs_only;
    }

    const auto run_start = Clock::now();
    RunResult result;

    PreparedData data = prepare_data(cfg);
    if (cfg.arch.front() != data.train.feature_dim()) {
        throw ConfigError("config: arch input width " +
                          std::to_string(cfg.arch.front()) +
                          " does not match feature dim " +
                          std::to_string(data.train.feature_dim()));
    }
    if (cfg.arch.back() != static_cast<std::size_t>(data.train.num_classes)) {
        throw ConfigError("config: arch output width does not match class count");
    }
    if (cfg.noise > 0.0) {
        data.train = inject_label_noise(data.train, cfg.noise,
                                        split_seed(cfg.seed, SeedStream::noise));
    }
    const std::size_t n = data.train.size();

    const bool out_files = !cfg.out_dir.empty();
    if (out_files) {
        std::filesystem::create_directories(cfg.out_dir);
    }
    const auto out_path = [&](const std::string& name) {
        return (std::filesystem::path(cfg.out_dir) / name).string();
    };

    // Teacher, trained on the same (possibly noisy) training set.
    std::vector<std::size_t> teacher_arch =
        cfg.teacher.arch.empty() ? cfg.arch : cfg.teacher.arch;
    std::optional<TeacherCache> cache;
    if (cfg.kd) {
        const TeacherEpochHook hook = [&](int epoch, double loss, double secs,
                                          const Model& m) {
            EpochMetrics row;
            row.epoch = epoch;
            row.phase = "teacher";
            row.train_loss = loss;
            row.train_acc = evaluate(m, data.train, ForwardMode::full_precision);
            row.test_acc = evaluate(m, data.test, ForwardMode::full_precision);
            row.coreset_size = n;
            row.training_time_s = secs;
            result.metrics.rows.push_back(row);
        };
        Model teacher = train_teacher(teacher_arch, data.train, cfg.teacher.epochs,
                                      cfg.teacher.lr, cfg.batch_size,
                                      split_seed(cfg.seed, SeedStream::teacher_init),
                                      hook);
        result.teacher = teacher;
        cache.emplace(std::move(teacher), data.train);
        cache->warm_up();
        result.counters.teacher_forwards = cache->forward_count();
    }

    // Student with its quantization plan; scales are fixed once here.
    QuantSpec qspec{cfg.weight_bits, cfg.activation_bits,
                    cfg.full_precision_first_last};
    Model student = init_model(cfg.arch, split_seed(cfg.seed, SeedStream::model_init));
    configure_quantization(student, qspec);
    calibrate_weight_scales(student);
    if (cfg.activation_bits < 32) {
        calibrate_activation_scales(
            student, data.train.gather_features(data.train.all_ids()));
    }

    // Baseline probes and imports.
    std::optional<ProbeOutcome> probe;
    if (cfg.selector == SelectorKind::el2n ||
        cfg.selector == SelectorKind::forgetting) {
        probe = run_early_probe(cfg, data.train, qspec);
    }
    std::optional<Coreset> imported;
    if (cfg.selector == SelectorKind::imported) {
        imported = load_coreset(cfg.import_coreset);
        validate_coreset_ids(*imported, n);
    }

    // Epoch horizon: fixed budget mode converts a step budget into an
    // epoch count, so smaller kept fractions run proportionally longer.
    const std::size_t kept =
        cfg.selector == SelectorKind::none
            ? n
            : (imported ? imported->member_ids.size() : coreset_size(cfg.fraction, n));
    const auto steps_per_epoch = static_cast<long long>(
        (kept + cfg.batch_size - 1) / cfg.batch_size);
    int epochs_effective = cfg.epochs;
    if (cfg.max_steps > 0) {
        epochs_effective = static_cast<int>(
            (cfg.max_steps + steps_per_epoch - 1) / steps_per_epoch);
        epochs_effective = std::max(epochs_effective, 1);
    }

    Model last_good = student;
    Coreset coreset;
    long long steps_done = 0;
    bool budget_exhausted = false;

    for (int t = 0; t < epochs_effective && !budget_exhausted; ++t) {
        EpochMetrics row;
        row.epoch = t;
        row.phase = "qat";

        // Selection. The scoring snapshot sees the model exactly as the
        // epoch starts.
        const auto sel_start = Clock::now();
        const bool cadence = (t % cfg.interval) == 0;
        if (t == 0 || (cadence && cfg.selector != SelectorKind::none &&
                       cfg.selector != SelectorKind::imported)) {
            const std::size_t round = static_cast<std::size_t>(t) /
                                      static_cast<std::size_t>(cfg.interval);
            switch (cfg.selector) {
                case SelectorKind::none: {
                    coreset.epoch_created = t;
                    coreset.member_ids = data.train.all_ids();
                    coreset.fraction = 1.0;
                    coreset.strategy = "none";
                    coreset.seed = cfg.seed;
                    break;
                }
                case SelectorKind::imported: {
                    coreset = *imported;
                    coreset.epoch_created = t;
                    break;
                }
                case SelectorKind::acs: {
                    const double beta = annealing_coefficient(t, epochs_effective,
                                                              cfg.annealing);
                    std::function<const ProbVector&(std::size_t)> lookup;
                    if (cache) {
                        lookup = [&](std::size_t id) -> const ProbVector& {
                            return cache->predict(id);
                        };
                    }
                    auto scores = score_dataset(student, data.train, t, beta, lookup);
                    result.counters.selection_student_forwards += n;
                    coreset = select_topk(scores, cfg.fraction, t, "acs", cfg.seed);
                    if (out_files) {
                        write_scores_csv(
                            out_path("scores_epoch" + std::to_string(t) + ".csv"),
                            scores);
                    }
                    result.scores.push_back(std::move(scores));
                    break;
                }
                case SelectorKind::random_subset: {
                    BaselineState state;
                    state.dataset_size = n;
                    state.round = round;
                    // Redrawn per round; each draw gets its own stream.
                    coreset = baseline_select(
                        SelectorKind::random_subset, state, cfg.fraction,
                        split_seed(cfg.seed, SeedStream::selector, round), t);
                    break;
                }
                case SelectorKind::el2n:
                case SelectorKind::forgetting: {
                    BaselineState state;
                    state.dataset_size = n;
                    state.round = round;
                    if (cfg.selector == SelectorKind::el2n) {
                        state.early_scores = probe->scores;
                    } else {
                        state.forgetting_events = probe->forget_events;
                    }
                    coreset = baseline_select(cfg.selector, state, cfg.fraction,
                                              split_seed(cfg.seed, SeedStream::selector),
                                              t);
                    break;
                }
                case SelectorKind::full_coverage: {
                    BaselineState state;
                    state.dataset_size = n;
                    state.round = round;
                    // One fixed partition per run: same seed every round,
                    // the round index walks the blocks.
                    coreset = baseline_select(SelectorKind::full_coverage, state,
                                              cfg.fraction,
                                              split_seed(cfg.seed, SeedStream::selector),
                                              t);
                    break;
                }
            }
            ++result.counters.selection_rounds;
            result.coresets.push_back(coreset);
            if (out_files) {
                save_coreset(coreset,
                             out_path("coreset_epoch" + std::to_string(t) + ".txt"));
            }
        }
        result.coreset_round_by_epoch.push_back(result.coresets.size() - 1);
        row.selection_time_s = seconds_since(sel_start);
        row.coreset_size = coreset.member_ids.size();

        if (cfg.recalibrate_every > 0 && t > 0 && t % cfg.recalibrate_every == 0) {
            calibrate_weight_scales(student);
        }

        // Training on the current coreset.
        const auto train_start = Clock::now();
        std::vector<std::size_t> order = coreset.member_ids;
        std::sort(order.begin(), order.end());
        Rng shuffle_rng(split_seed(cfg.seed, SeedStream::shuffle_base,
                                   static_cast<std::uint64_t>(t)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t samples_seen = 0;
        for (std::size_t lo = 0; lo < order.size() && !budget_exhausted;
             lo += cfg.batch_size) {
            const std::size_t hi = std::min(lo + cfg.batch_size, order.size());
            const std::vector<std::size_t> batch(order.begin() + static_cast<long>(lo),
                                                 order.begin() + static_cast<long>(hi));
            const Tensor2 x = data.train.gather_features(batch);
            Tensor2 targets(batch.size(),
                            static_cast<std::size_t>(data.train.num_classes));
            if (cfg.kd) {
                for (std::size_t b = 0; b < batch.size(); ++b) {
                    const ProbVector& pt = cache->predict(batch[b]);
                    const auto& hard = data.train.samples[batch[b]].label_one_hot;
                    for (std::size_t c = 0; c < targets.cols; ++c) {
                        targets.at(b, c) = (1.0 - cfg.kd_lambda) * pt[c] +
                                           cfg.kd_lambda * hard[c];
                    }
                }
            } else {
                targets = data.train.gather_labels(batch);
            }

            const ForwardTrace trace = forward(student, x, ForwardMode::quantized);
            result.counters.train_sample_forwards += batch.size();
            double loss = 0.0;
            for (std::size_t i = 0; i < targets.v.size(); ++i) {
                loss -= targets.v[i] * std::log(std::max(trace.probs.v[i], 1e-12));
            }
            loss /= static_cast<double>(batch.size());
            if (!std::isfinite(loss)) {
                if (out_files) {
                    save_model(last_good, out_path("model_last_good.bin"), "student");
                }
                throw RunError("run_qat: loss diverged at epoch " +
                               std::to_string(t) +
                               (out_files ? "; last good checkpoint saved" : ""));
            }
            loss_sum += loss * static_cast<double>(batch.size());
            samples_seen += batch.size();

            GradientBuffer g = backward(student, trace, targets);
            g.scale(1.0 / static_cast<double>(batch.size()));
            apply_sgd(student, g, cfg.lr);
            ++result.counters.sgd_steps;
            ++steps_done;
            if (cfg.max_steps > 0 && steps_done >= cfg.max_steps) {
                budget_exhausted = true;
            }
        }
        row.training_time_s = seconds_since(train_start);
        row.train_loss =
            samples_seen > 0 ? loss_sum / static_cast<double>(samples_seen) : 0.0;

        row.train_acc = evaluate(student, data.train, ForwardMode::quantized);
        row.test_acc = evaluate(student, data.test, ForwardMode::quantized);
        result.metrics.rows.push_back(row);
        last_good = student;
    }

    result.final_train_acc = result.metrics.rows.back().train_acc;
    result.final_test_acc = result.metrics.rows.back().test_acc;
    if (cfg.noise > 0.0 && !data.train.noisy_ids.empty()) {
        std::vector<std::size_t> pruned;
        const std::set<std::size_t> kept_ids(coreset.member_ids.begin(),
                                             coreset.member_ids.end());
        for (std::size_t id = 0; id < n; ++id) {
            if (kept_ids.count(id) == 0) pruned.push_back(id);
        }
        result.final_noisy_recall = noisy_recall(pruned, data.train.noisy_ids);
    }

    result.metrics.total_time_s = seconds_since(run_start);
    result.model = std::move(student);
    RunConfig effective = cfg;
    effective.data.synthetic.seed = data.synthetic_seed;
    effective.data.synthetic_seed_set = true;
    effective.teacher.arch = teacher_arch;
    result.effective_config = effective;

    if (out_files) {
        write_metrics_csv(out_path("metrics.csv"), result.metrics);
        write_timing_csv(out_path("timing.csv"), result.metrics);
        save_model(result.model, out_path("model_final.bin"), "student");
        if (result.teacher) {
            save_model(*result.teacher, out_path("teacher.bin"), "teacher");
        }
        write_effective_config(effective, data, epochs_effective, teacher_arch,
                               result.model, out_path("config_effective.json"));
    }
    return result;
}

TeacherResult run_teacher_only(const RunConfig& input_cfg) {
    RunConfig cfg = input_cfg;
    validate_run_config(cfg);
    if (cfg.teacher.epochs < 1) {
        throw ConfigError("config: teacher.epochs must be positive");
    }
    const auto run_start = Clock::now();

    PreparedData data = prepare_data(cfg);
    if (cfg.noise > 0.0) {
        data.train = inject_label_noise(data.train, cfg.noise,
                                        split_seed(cfg.seed, SeedStream::noise));
    }
    const std::vector<std::size_t> teacher_arch =
        cfg.teacher.arch.empty() ? cfg.arch : cfg.teacher.arch;
    if (teacher_arch.front() != data.train.feature_dim()) {
        throw ConfigError("config: teacher arch input width does not match "
                          "feature dim");
    }
    if (teacher_arch.back() != static_cast<std::size_t>(data.train.num_classes)) {
        throw ConfigError("config: teacher arch output width does not match "
                          "class count");
    }

    TeacherResult result;
    const TeacherEpochHook hook = [&](int epoch, double loss, double secs,
                                      const Model& m) {
        EpochMetrics row;
        row.epoch = epoch;
        row.phase = "teacher";
        row.train_loss = loss;
        row.train_acc = evaluate(m, data.train, ForwardMode::full_precision);
        row.test_acc = evaluate(m, data.test, ForwardMode::full_precision);
        row.coreset_size = data.train.size();
        row.training_time_s = secs;
        result.metrics.rows.push_back(row);
    };
    result.model = train_teacher(teacher_arch, data.train, cfg.teacher.epochs,
                                 cfg.teacher.lr, cfg.batch_size,
                                 split_seed(cfg.seed, SeedStream::teacher_init),
                                 hook);
    result.final_train_acc = result.metrics.rows.back().train_acc;
    result.final_test_acc = result.metrics.rows.back().test_acc;
    result.metrics.total_time_s = seconds_since(run_start);

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        const auto dir = std::filesystem::path(cfg.out_dir);
        save_model(result.model, (dir / "teacher.bin").string(), "teacher");
        write_metrics_csv((dir / "metrics.csv").string(), result.metrics);
        write_timing_csv((dir / "timing.csv").string(), result.metrics);
    }
    return result;
}

std::vector<SweepEntry> run_sweep(const RunConfig& base, const std::string& axis,
                                  const std::vector<std::string>& values) {
    if (values.empty()) {
        throw ConfigError("sweep: no values given");
    }
    const bool is_fraction = axis == "S" || axis == "fraction";
    const bool is_interval = axis == "R" || axis == "interval";
    const bool is_strategy = axis == "strategy" || axis == "annealing";
    const bool is_selector = axis == "selector";
    if (!is_fraction && !is_interval && !is_strategy && !is_selector) {
        throw ConfigError("sweep: unknown axis '" + axis +
                          "' (expected S, R, strategy or selector)");
    }

    std::vector<SweepEntry> entries;
    for (std::size_t i = 0; i < values.size(); ++i) {
        SweepEntry entry;
        entry.axis = axis;
        entry.value = values[i];
        entry.seed = split_seed(base.seed, SeedStream::sweep_base, i);
        RunConfig cfg = base;
        cfg.seed = entry.seed;
        try {
            if (is_fraction) {
                cfg.fraction = std::stod(values[i]);
            } else if (is_interval) {
                cfg.interval = std::stoi(values[i]);
            } else if (is_strategy) {
                cfg.annealing = annealing_from_string(values[i]);
            } else {
                cfg.selector = selector_from_string(values[i]);
            }
            if (!base.out_dir.empty()) {
                cfg.out_dir = (std::filesystem::path(base.out_dir) /
                               (axis + "_" + values[i]))
                                  .string();
            }
            const RunResult r = run_qat(cfg);
            entry.ok = true;
            entry.final_test_acc = r.final_test_acc;
            entry.timing = timing_breakdown(r.metrics);
        } catch (const std::exception& e) {
            entry.ok = false;
            entry.error = e.what();
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

void write_summary_csv(const std::string& path,
                       const std::vector<SweepEntry>& entries) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open file for write: " + path);
    }
    out << "axis,value,seed,status,final_test_acc,total_time_s,selection_time_s,"
           "training_time_s,error\n";
    for (const auto& e : entries) {
        std::string err = e.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << e.axis << ',' << e.value << ',' << e.seed << ','
            << (e.ok ? "ok" : "failed") << ',' << format_double(e.final_test_acc)
            << ',' << format_double(e.timing.total_s) << ','
            << format_double(e.timing.selection_s) << ','
            << format_double(e.timing.training_s) << ',' << err << '\n';
    }
    if (!out) {
        throw InputError("write failed: " + path);
    }
}

ScoreColumn score_column_from_string(const std::string& name) {
    if (name == "evs" || name == "d_evs") return ScoreColumn::evs;
    if (name == "ds" || name == "d_ds") return ScoreColumn::ds;
    if (name == "acs" || name == "d_acs" || name == "combined") {
        return ScoreColumn::combined;
    }
    throw ConfigError("unknown score column: " + name);
}

std::vector<std::size_t> score_histogram(const std::vector<ScoreRecord>& records,
                                         int epoch, std::size_t bins,
                                         ScoreColumn column) {
    if (bins == 0) {
        throw ConfigError("score_histogram: bins must be positive");
    }
    const double hi = std::sqrt(2.0);
    std::vector<std::size_t> counts(bins, 0);
    std::size_t matched = 0;
    for (const auto& r : records) {
        if (r.epoch != epoch) continue;
        ++matched;
        double v = 0.0;
        switch (column) {
            case ScoreColumn::evs: v = r.evs; break;
            case ScoreColumn::ds: v = r.ds; break;
            case ScoreColumn::combined: v = r.combined; break;
        }
        auto idx = static_cast<std::size_t>(
            std::floor(v / hi * static_cast<double>(bins)));
        if (idx >= bins) idx = bins - 1; // v == sqrt(2) lands in the top bin
        ++counts[idx];
    }
    if (matched == 0) {
        throw InputError("score_histogram: no records for epoch " +
                         std::to_string(epoch));
    }
    return counts;
}

void write_histogram_csv(const std::string& path,
                         const std::vector<std::size_t>& counts) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open file for write: " + path);
    }
    const double hi = std::sqrt(2.0);
    const double width = hi / static_cast<double>(counts.size());
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < counts.size(); ++i) {
        out << format_double(static_cast<double>(i) * width) << ','
            << format_double(i + 1 == counts.size()
                                 ? hi
                                 : static_cast<double>(i + 1) * width)
            << ',' << counts[i] << '\n';
    }
    if (!out) {
        throw InputError("write failed: " + path);
    }
}

} // namespace acs
