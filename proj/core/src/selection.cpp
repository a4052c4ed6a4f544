#include "acs/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "acs/csv.hpp"
#include "acs/errors.hpp"
#include "acs/rng.hpp"

namespace acs {

std::size_t coreset_size(double fraction, std::size_t n) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("coreset_size: fraction must lie in (0, 1]");
    }
    if (n == 0) {
        throw InputError("coreset_size: empty dataset");
    }
    const auto k = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(n) + 1e-9));
    return std::max<std::size_t>(1, k);
}

Coreset select_topk(const std::vector<ScoreRecord>& scores, double fraction,
                    int epoch, const std::string& strategy_tag,
                    std::uint64_t seed) {
    if (scores.empty()) {
        throw InputError("select_topk: no scores");
    }
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a].combined != scores[b].combined) {
            return scores[a].combined > scores[b].combined;
        }
        return scores[a].sample_id < scores[b].sample_id;
    });

    const std::size_t k = coreset_size(fraction, scores.size());
    Coreset c;
    c.epoch_created = epoch;
    c.fraction = fraction;
    c.strategy = strategy_tag;
    c.seed = seed;
    c.member_ids.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        c.member_ids.push_back(scores[order[i]].sample_id);
    }

    std::set<std::size_t> uniq(c.member_ids.begin(), c.member_ids.end());
    if (uniq.size() != c.member_ids.size()) {
        throw InputError("select_topk: duplicate sample ids in scores");
    }
    return c;
}

void ForgettingLedger::update(const std::vector<bool>& correct) {
    if (correct.empty()) {
        throw InputError("forgetting ledger: empty snapshot");
    }
    if (!primed_) {
        prev_correct_.assign(correct.size(), 0);
        events_.assign(correct.size(), 0);
        for (std::size_t i = 0; i < correct.size(); ++i) {
            prev_correct_[i] = correct[i] ? 1 : 0;
        }
        primed_ = true;
        return;
    }
    if (correct.size() != prev_correct_.size()) {
        throw InputError("forgetting ledger: snapshot size " +
                         std::to_string(correct.size()) + " does not match " +
                         std::to_string(prev_correct_.size()));
    }
    for (std::size_t i = 0; i < correct.size(); ++i) {
        if (prev_correct_[i] != 0 && !correct[i]) {
            ++events_[i];
        }
        prev_correct_[i] = correct[i] ? 1 : 0;
    }
}

SelectorKind selector_from_string(const std::string& name) {
    if (name == "acs") return SelectorKind::acs;
    if (name == "none") return SelectorKind::none;
    if (name == "random") return SelectorKind::random_subset;
    if (name == "el2n") return SelectorKind::el2n;
    if (name == "forgetting") return SelectorKind::forgetting;
    if (name == "full_coverage") return SelectorKind::full_coverage;
    if (name == "imported") return SelectorKind::imported;
    throw ConfigError("unknown selector: " + name);
}

std::string to_string(SelectorKind k) {
    switch (k) {
        case SelectorKind::acs: return "acs";
        case SelectorKind::none: return "none";
        case SelectorKind::random_subset: return "random";
        case SelectorKind::el2n: return "el2n";
        case SelectorKind::forgetting: return "forgetting";
        case SelectorKind::full_coverage: return "full_coverage";
        case SelectorKind::imported: return "imported";
    }
    throw ConfigError("unknown selector value");
}

namespace {

Coreset random_subset(const BaselineState& state, double fraction,
                      std::uint64_t seed, int epoch) {
    const std::size_t n = state.dataset_size;
    const std::size_t k = coreset_size(fraction, n);
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(ids[i], ids[j]);
    }
    Coreset c;
    c.epoch_created = epoch;
    c.fraction = fraction;
    c.strategy = "random";
    c.seed = seed;
    c.member_ids.assign(ids.begin(), ids.begin() + static_cast<long>(k));
    return c;
}

Coreset coverage_block(const BaselineState& state, double fraction,
                       std::uint64_t seed, int epoch) {
    const std::size_t n = state.dataset_size;
    const std::size_t k = coreset_size(fraction, n);
    const std::size_t blocks = (n + k - 1) / k;
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    Rng rng(seed);
    rng.shuffle(ids);
    const std::size_t r = state.round % blocks;
    const std::size_t lo = r * k;
    const std::size_t hi = std::min(lo + k, n);
    Coreset c;
    c.epoch_created = epoch;
    c.fraction = fraction;
    c.strategy = "full_coverage";
    c.seed = seed;
    c.member_ids.assign(ids.begin() + static_cast<long>(lo),
                        ids.begin() + static_cast<long>(hi));
    return c;
}

std::vector<ScoreRecord> scores_from_values(const std::vector<double>& values,
                                            int epoch) {
    std::vector<ScoreRecord> scores(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        scores[i].sample_id = i;
        scores[i].epoch = epoch;
        scores[i].evs = values[i];
        scores[i].combined = values[i];
    }
    return scores;
}

} // namespace

Coreset baseline_select(SelectorKind kind, const BaselineState& state,
                        double fraction, std::uint64_t seed, int epoch) {
    if (state.dataset_size == 0) {
        throw InputError("baseline_select: dataset_size is zero");
    }
    switch (kind) {
        case SelectorKind::random_subset:
            return random_subset(state, fraction, seed, epoch);
        case SelectorKind::full_coverage:
            return coverage_block(state, fraction, seed, epoch);
        case SelectorKind::el2n: {
            if (!state.early_scores ||
                state.early_scores->size() != state.dataset_size) {
                throw StateError("baseline_select: el2n needs early-model scores");
            }
            Coreset c = select_topk(scores_from_values(*state.early_scores, epoch),
                                    fraction, epoch, "el2n", seed);
            return c;
        }
        case SelectorKind::forgetting: {
            if (!state.forgetting_events ||
                state.forgetting_events->size() != state.dataset_size) {
                throw StateError("baseline_select: forgetting needs event counts");
            }
            std::vector<double> values(state.forgetting_events->size());
            for (std::size_t i = 0; i < values.size(); ++i) {
                values[i] = static_cast<double>((*state.forgetting_events)[i]);
            }
            Coreset c = select_topk(scores_from_values(values, epoch), fraction,
                                    epoch, "forgetting", seed);
            return c;
        }
        case SelectorKind::acs:
        case SelectorKind::none:
        case SelectorKind::imported:
            throw ConfigError("baseline_select: " + to_string(kind) +
                              " is not a baseline strategy");
    }
    throw ConfigError("baseline_select: unknown selector");
}

double coreset_overlap_percent(const Coreset& a, const Coreset& b) {
    if (a.member_ids.empty() || b.member_ids.empty()) {
        throw InputError("coreset_overlap: empty coreset");
    }
    if (a.member_ids.size() != b.member_ids.size()) {
        throw InputError("coreset_overlap: sizes differ, " +
                         std::to_string(a.member_ids.size()) + " vs " +
                         std::to_string(b.member_ids.size()));
    }
    const std::set<std::size_t> sa(a.member_ids.begin(), a.member_ids.end());
    std::size_t shared = 0;
    for (std::size_t id : b.member_ids) {
        if (sa.count(id) != 0) ++shared;
    }
    return 100.0 * static_cast<double>(shared) /
           static_cast<double>(a.member_ids.size());
}

void save_coreset(const Coreset& c, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open file for write: " + path);
    }
    out << "#coreset v1 strategy=" << c.strategy << " S=" << format_double(c.fraction)
        << " epoch=" << c.epoch_created << " seed=" << c.seed << "\n";
    std::vector<std::size_t> sorted = c.member_ids;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t id : sorted) {
        out << id << "\n";
    }
    if (!out) {
        throw InputError("write failed: " + path);
    }
}

Coreset load_coreset(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open file: " + path);
    }
    std::string header;
    if (!std::getline(in, header)) {
        throw FormatError(path + ": empty file");
    }
    std::istringstream hs(header);
    std::string tag;
    hs >> tag;
    if (tag != "#coreset") {
        throw FormatError(path + ": first line must start with '#coreset'");
    }
    std::string version;
    hs >> version;
    if (version != "v1") {
        throw FormatError(path + ": unsupported version '" + version + "'");
    }

    Coreset c;
    bool have_strategy = false, have_fraction = false, have_epoch = false,
         have_seed = false;
    std::string field;
    while (hs >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) {
            throw FormatError(path + ": malformed header field '" + field + "'");
        }
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        try {
            if (key == "strategy") {
                c.strategy = value;
                have_strategy = true;
            } else if (key == "S") {
                c.fraction = std::stod(value);
                have_fraction = true;
            } else if (key == "epoch") {
                c.epoch_created = std::stoi(value);
                have_epoch = true;
            } else if (key == "seed") {
                c.seed = std::stoull(value);
                have_seed = true;
            } else {
                throw FormatError(path + ": unknown header field '" + key + "'");
            }
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception&) {
            throw FormatError(path + ": unparseable header value '" + field + "'");
        }
    }
    if (!have_strategy || !have_fraction || !have_epoch || !have_seed) {
        throw FormatError(path + ": header is missing required fields");
    }

    std::string line;
    std::size_t line_no = 1;
    std::set<std::size_t> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            std::size_t pos = 0;
            const auto id = static_cast<std::size_t>(std::stoull(line, &pos));
            if (pos != line.size()) {
                throw InputError("trailing characters");
            }
            if (!seen.insert(id).second) {
                throw FormatError(path + ": duplicate id " + std::to_string(id) +
                                  " on line " + std::to_string(line_no));
            }
            c.member_ids.push_back(id);
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception&) {
            throw FormatError(path + ": unparseable id on line " +
                              std::to_string(line_no));
        }
    }
    if (c.member_ids.empty()) {
        throw FormatError(path + ": no member ids");
    }
    return c;
}

void validate_coreset_ids(const Coreset& c, std::size_t dataset_size) {
    if (c.member_ids.empty()) {
        throw InputError("coreset has no members");
    }
    std::set<std::size_t> seen;
    for (std::size_t id : c.member_ids) {
        if (id >= dataset_size) {
            throw InputError("coreset id " + std::to_string(id) +
                             " out of range for dataset of " +
                             std::to_string(dataset_size));
        }
        if (!seen.insert(id).second) {
            throw InputError("coreset id " + std::to_string(id) +
                             " appears more than once");
        }
    }
}

} // namespace acs
