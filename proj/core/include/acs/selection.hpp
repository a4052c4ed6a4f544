#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acs/scoring.hpp"

namespace acs {

// One selected subset of the training set. member_ids are unique; for
// score-ranked strategies they are ordered by descending score at
// selection time.
struct Coreset {
    int epoch_created = 0;
    std::vector<std::size_t> member_ids;
    double fraction = 0.0;
    std::string strategy;
    std::uint64_t seed = 0;
};

// max(1, floor(fraction * n)). A small epsilon absorbs representation
// error in fraction * n so decimal fractions land on the intended floor.
std::size_t coreset_size(double fraction, std::size_t n);

// Keeps the top fraction of samples by combined score. Ties break toward
// the lower sample id so selection is a pure function of its inputs.
Coreset select_topk(const std::vector<ScoreRecord>& scores, double fraction,
                    int epoch, const std::string& strategy_tag,
                    std::uint64_t seed);

// Tracks per-sample forgetting events across sequential accuracy
// snapshots: an event is a sample that was classified correctly at the
// previous snapshot and is wrong at the current one.
class ForgettingLedger {
public:
    void update(const std::vector<bool>& correct);
    const std::vector<std::size_t>& events() const { return events_; }
    bool primed() const { return primed_; }

private:
    bool primed_ = false;
    std::vector<std::uint8_t> prev_correct_;
    std::vector<std::size_t> events_;
};

enum class SelectorKind {
    acs,           // annealed score selection
    none,          // no selection, train on everything
    random_subset, // seeded uniform subset
    el2n,          // top scores of an early-trained model
    forgetting,    // most-forgotten samples of an early-trained model
    full_coverage, // rotating blocks of a seeded partition
    imported,      // fixed coreset loaded from file
};

SelectorKind selector_from_string(const std::string& name);
std::string to_string(SelectorKind k);

// Inputs the non-score baselines need. Fill only what the strategy uses.
struct BaselineState {
    std::size_t dataset_size = 0;
    // Block cursor for full_coverage; successive selections sweep the
    // partition in order, cycling.
    std::size_t round = 0;
    std::optional<std::vector<double>> early_scores;          // el2n
    std::optional<std::vector<std::size_t>> forgetting_events; // forgetting
};

Coreset baseline_select(SelectorKind kind, const BaselineState& state,
                        double fraction, std::uint64_t seed, int epoch);

// Percentage of shared members between two equally sized coresets.
double coreset_overlap_percent(const Coreset& a, const Coreset& b);

// Text format: one header line
//   #coreset v1 strategy=<tag> S=<frac> epoch=<t> seed=<n>
// followed by the member ids in ascending order, one per line.
void save_coreset(const Coreset& c, const std::string& path);
Coreset load_coreset(const std::string& path);

// Import-time check: the coreset is nonempty, ids are unique and every id
// exists in a dataset of the given size.
void validate_coreset_ids(const Coreset& c, std::size_t dataset_size);

} // namespace acs
