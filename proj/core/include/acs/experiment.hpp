#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acs/dataset.hpp"
#include "acs/distill.hpp"
#include "acs/model.hpp"
#include "acs/scoring.hpp"
#include "acs/selection.hpp"

namespace acs {

struct DataConfig {
    std::string kind = "synthetic"; // synthetic | idx | cifar10 | native
    SyntheticSpec synthetic;
    bool synthetic_seed_set = false; // false: derive the seed from the run seed
    double test_fraction = 0.2;      // synthetic holdout share
    std::string train_images, train_labels; // idx
    std::string test_images, test_labels;
    std::vector<std::string> train_batches, test_batches; // cifar10
    std::string train_path, test_path;                    // native
};

struct TeacherConfig {
    std::vector<std::size_t> arch; // empty: same as student arch
    int epochs = 60;
    double lr = 0.1;
};

// Complete description of one training run. Every stochastic choice the
// run makes is derived from `seed` through named streams, so a config
// replays bit-identically.
struct RunConfig {
    DataConfig data;
    std::vector<std::size_t> arch;
    int weight_bits = 2;
    int activation_bits = 32;
    bool full_precision_first_last = true;
    int epochs = 20;
    int interval = 5;      // selection cadence R
    double fraction = 0.3; // kept share S
    AnnealingStrategy annealing = AnnealingStrategy::cosine;
    SelectorKind selector = SelectorKind::acs;
    bool kd = true;
    double kd_lambda = 0.0; // hard-label share mixed into the KD target
    double lr = 0.05;
    std::size_t batch_size = 32;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string out_dir; // empty: keep everything in memory
    TeacherConfig teacher;
    int recalibrate_every = 0;  // re-fit weight scales every k epochs, 0 = off
    long long max_steps = 0;    // fixed gradient-step budget, 0 = epoch mode
    int early_epochs = 5;       // probe length for el2n / forgetting
    std::string import_coreset; // selector = imported
};

RunConfig load_run_config(const std::string& path);
void validate_run_config(const RunConfig& cfg);

struct EpochMetrics {
    int epoch = 0;
    std::string phase; // "teacher" or "qat"
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    std::size_t coreset_size = 0;
    double selection_time_s = 0.0;
    double training_time_s = 0.0;
};

struct MetricsLog {
    std::vector<EpochMetrics> rows;
    double total_time_s = 0.0;
};

struct TimingBreakdown {
    double total_s = 0.0;
    double selection_s = 0.0;
    double training_s = 0.0;
};

TimingBreakdown timing_breakdown(const MetricsLog& log);

// Work counters for cost assertions: selection cost must scale with the
// dataset, never with the kept fraction.
struct OpCounters {
    std::size_t selection_rounds = 0;
    std::size_t selection_student_forwards = 0; // samples scored
    std::size_t teacher_forwards = 0;           // samples through the teacher
    std::size_t train_sample_forwards = 0;      // samples in training batches
    std::size_t sgd_steps = 0;
};

struct RunResult {
    RunConfig effective_config;
    MetricsLog metrics;
    Model model;
    std::optional<Model> teacher;
    std::vector<Coreset> coresets; // one per selection round
    // For each epoch, the index into `coresets` that was trained on.
    std::vector<std::size_t> coreset_round_by_epoch;
    std::vector<std::vector<ScoreRecord>> scores; // per scored round
    OpCounters counters;
    double final_train_acc = 0.0;
    double final_test_acc = 0.0;
    double final_noisy_recall = -1.0; // -1 when the run had no noise
};

// Runs the full pipeline: data preparation, optional label noise, teacher
// training when distillation is on, quantizer calibration, then the
// epoch loop with periodic coreset selection. When out_dir is set, writes
// metrics.csv, timing.csv, per-round score dumps and coreset files,
// checkpoints and the effective config.
RunResult run_qat(const RunConfig& cfg);

struct TeacherResult {
    Model model;
    MetricsLog metrics;
    double final_train_acc = 0.0;
    double final_test_acc = 0.0;
};

// Trains only the full-precision teacher on the configured data. When
// out_dir is set, writes teacher.bin, metrics.csv and timing.csv.
TeacherResult run_teacher_only(const RunConfig& cfg);

// Serialized CSV forms. Metrics hold only deterministic columns so a
// committed file can be compared byte for byte; wall-clock timings go to
// their own file.
void write_metrics_csv(const std::string& path, const MetricsLog& log);
void write_timing_csv(const std::string& path, const MetricsLog& log);

struct SweepEntry {
    std::string axis;
    std::string value;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double final_test_acc = 0.0;
    TimingBreakdown timing;
};

// One run_qat per value of the swept axis (fraction/S, interval/R,
// strategy, selector), each with a seed derived from the base seed. A
// failing child is recorded and does not stop the sweep.
std::vector<SweepEntry> run_sweep(const RunConfig& base, const std::string& axis,
                                  const std::vector<std::string>& values);

void write_summary_csv(const std::string& path,
                       const std::vector<SweepEntry>& entries);

enum class ScoreColumn { evs, ds, combined };
ScoreColumn score_column_from_string(const std::string& name);

// Fixed-width histogram of one score column over its full range
// [0, sqrt(2)]. Counts sum to the number of records at that epoch.
std::vector<std::size_t> score_histogram(const std::vector<ScoreRecord>& records,
                                         int epoch, std::size_t bins,
                                         ScoreColumn column);

void write_histogram_csv(const std::string& path,
                         const std::vector<std::size_t>& counts);

} // namespace acs
