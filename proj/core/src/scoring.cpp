#include "acs/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "acs/csv.hpp"
#include "acs/errors.hpp"

namespace acs {

namespace {

double l2_distance(const ProbVector& a, const ProbVector& b, const char* who) {
    if (a.size() != b.size()) {
        throw DimensionError(std::string(who) + ": size mismatch " +
                             std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

} // namespace

AnnealingStrategy annealing_from_string(const std::string& name) {
    if (name == "fixed") return AnnealingStrategy::fixed;
    if (name == "linear") return AnnealingStrategy::linear;
    if (name == "sqrt") return AnnealingStrategy::sqrt_root;
    if (name == "quadratic") return AnnealingStrategy::quadratic;
    if (name == "cosine") return AnnealingStrategy::cosine;
    if (name == "evs_only") return AnnealingStrategy::evs_only;
    if (name == "ds_only") return AnnealingStrategy::ds_only;
    throw ConfigError("unknown annealing strategy: " + name);
}

std::string to_string(AnnealingStrategy s) {
    switch (s) {
        case AnnealingStrategy::fixed: return "fixed";
        case AnnealingStrategy::linear: return "linear";
        case AnnealingStrategy::sqrt_root: return "sqrt";
        case AnnealingStrategy::quadratic: return "quadratic";
        case AnnealingStrategy::cosine: return "cosine";
        case AnnealingStrategy::evs_only: return "evs_only";
        case AnnealingStrategy::ds_only: return "ds_only";
    }
    throw ConfigError("unknown annealing strategy value");
}

double error_vector_score(const ProbVector& prediction, const ProbVector& label) {
    return l2_distance(prediction, label, "error_vector_score");
}

double disagreement_score(const ProbVector& prediction, const ProbVector& teacher) {
    return l2_distance(prediction, teacher, "disagreement_score");
}

double annealing_coefficient(int epoch, int total_epochs, AnnealingStrategy s) {
    if (total_epochs < 1) {
        throw DomainError("annealing_coefficient: total_epochs must be positive");
    }
    if (epoch < 0 || epoch > total_epochs) {
        throw DomainError("annealing_coefficient: epoch " + std::to_string(epoch) +
                          " outside [0, " + std::to_string(total_epochs) + "]");
    }
    const double r = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    switch (s) {
        case AnnealingStrategy::fixed:
            return 0.5;
        case AnnealingStrategy::linear:
            return 1.0 - r;
        case AnnealingStrategy::sqrt_root:
            return 1.0 - std::sqrt(r);
        case AnnealingStrategy::quadratic:
            return 1.0 - r * r;
        case AnnealingStrategy::cosine:
            // Pin both ends: cos(pi/2) evaluates to ~6e-17, not 0.
            if (epoch == 0) return 1.0;
            if (epoch == total_epochs) return 0.0;
            return std::cos(r * 3.14159265358979323846 / 2.0);
        case AnnealingStrategy::evs_only:
            return 1.0;
        case AnnealingStrategy::ds_only:
            return 0.0;
    }
    throw ConfigError("unknown annealing strategy value");
}

double combined_score(double evs, double ds, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw DomainError("combined_score: beta " + std::to_string(beta) +
                          " outside [0, 1]");
    }
    if (!(evs >= 0.0) || !(ds >= 0.0)) {
        throw DomainError("combined_score: scores must be non-negative");
    }
    const double mixed = beta * evs + (1.0 - beta) * ds;
    return std::clamp(mixed, std::min(evs, ds), std::max(evs, ds));
}

double gradient_norm_oracle(const Model& m, const std::vector<double>& features,
                            const ProbVector& target, ForwardMode mode) {
    Tensor2 x(1, features.size());
    std::copy(features.begin(), features.end(), x.row(0));
    const ForwardTrace trace = forward(m, x, mode);
    Tensor2 t(1, target.size());
    std::copy(target.begin(), target.end(), t.row(0));
    const GradientBuffer g = backward(m, trace, t);
    return std::sqrt(g.squared_norm());
}

std::vector<ScoreRecord> score_dataset(
    const Model& m, const Dataset& data, int epoch, double beta,
    const std::function<const ProbVector&(std::size_t)>& teacher_lookup) {
    if (data.size() == 0) {
        throw InputError("score_dataset: empty dataset");
    }
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw DomainError("score_dataset: beta outside [0, 1]");
    }
    const bool needs_teacher = beta < 1.0;
    if (needs_teacher && !teacher_lookup) {
        throw StateError("score_dataset: beta < 1 needs teacher predictions");
    }

    const Tensor2 x = data.gather_features(data.all_ids());
    const ForwardTrace trace = forward(m, x, ForwardMode::quantized);

    std::vector<ScoreRecord> records;
    records.reserve(data.size());
    std::vector<double> row(trace.probs.cols);
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::copy(trace.probs.row(i), trace.probs.row(i) + trace.probs.cols,
                  row.begin());
        const ProbVector p{std::vector<double>(row)};
        ScoreRecord rec;
        rec.sample_id = data.samples[i].id;
        rec.epoch = epoch;
        rec.evs = error_vector_score(p, data.samples[i].label_one_hot);
        rec.ds = teacher_lookup
                     ? disagreement_score(p, teacher_lookup(data.samples[i].id))
                     : 0.0;
        rec.combined = combined_score(rec.evs, rec.ds, beta);
        records.push_back(rec);
    }
    return records;
}

void write_scores_csv(const std::string& path,
                      const std::vector<ScoreRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open file for write: " + path);
    }
    out << "epoch,sample_id,d_evs,d_ds,d_acs\n";
    for (const auto& r : records) {
        out << r.epoch << ',' << r.sample_id << ',' << format_double(r.evs)
            << ',' << format_double(r.ds) << ',' << format_double(r.combined)
            << '\n';
    }
    if (!out) {
        throw InputError("write failed: " + path);
    }
}

std::vector<ScoreRecord> load_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open file: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError(path + ": missing header line");
    }
    if (split_csv_line(line) !=
        std::vector<std::string>{"epoch", "sample_id", "d_evs", "d_ds", "d_acs"}) {
        throw FormatError(path + ": unexpected header '" + line + "'");
    }
    std::vector<ScoreRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 5) {
            throw FormatError(path + ": expected 5 fields on line " +
                              std::to_string(line_no));
        }
        try {
            ScoreRecord r;
            r.epoch = std::stoi(fields[0]);
            r.sample_id = static_cast<std::size_t>(std::stoull(fields[1]));
            r.evs = std::stod(fields[2]);
            r.ds = std::stod(fields[3]);
            r.combined = std::stod(fields[4]);
            records.push_back(r);
        } catch (const std::exception&) {
            throw FormatError(path + ": unparseable number on line " +
                              std::to_string(line_no));
        }
    }
    return records;
}

} // namespace acs
