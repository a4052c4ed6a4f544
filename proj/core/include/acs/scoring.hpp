#pragma once

#include <functional>
#include <string>
#include <vector>

#include "acs/dataset.hpp"
#include "acs/model.hpp"
#include "acs/tensor.hpp"

namespace acs {

// Per-sample selection scores at one scoring pass. evs measures the gap to
// the stored label, ds the gap to the teacher's prediction, combined the
// annealed mix of the two. All three live in [0, sqrt(2)].
struct ScoreRecord {
    std::size_t sample_id = 0;
    int epoch = 0;
    double evs = 0.0;
    double ds = 0.0;
    double combined = 0.0;
};

// Schedules for the mixing coefficient beta(t). All of them start from
// labels (beta high) and hand over to teacher agreement (beta low) except
// the two degenerate single-score modes and the constant one.
enum class AnnealingStrategy {
    fixed,     // 0.5 throughout
    linear,    // 1 - t/E
    sqrt_root, // 1 - sqrt(t/E)
    quadratic, // 1 - (t/E)^2
    cosine,    // cos(t * pi / (2E))
    evs_only,  // 1
    ds_only,   // 0
};

AnnealingStrategy annealing_from_string(const std::string& name);
std::string to_string(AnnealingStrategy s);

// L2 distance between prediction and one-hot (or soft) label.
double error_vector_score(const ProbVector& prediction, const ProbVector& label);

// L2 distance between student and teacher predictive distributions.
double disagreement_score(const ProbVector& prediction, const ProbVector& teacher);

// beta(t) for epoch t of a schedule spanning total_epochs. Defined on
// t in [0, total_epochs]; anything outside is a domain error.
double annealing_coefficient(int epoch, int total_epochs, AnnealingStrategy s);

// beta * evs + (1 - beta) * ds, clamped into [min, max] of the two inputs
// so the convex-combination bound holds exactly in floating point.
double combined_score(double evs, double ds, double beta);

// L2 norm of the single-sample loss gradient with respect to the weights
// along the requested path. Reference implementation for rank-agreement
// checks against evs.
double gradient_norm_oracle(const Model& m, const std::vector<double>& features,
                            const ProbVector& target, ForwardMode mode);

// Scores every sample of the dataset with the model state as given.
// teacher_lookup maps sample id to the teacher distribution; pass an empty
// function only when beta == 1 (pure evs), otherwise the disagreement term
// is required and this raises a state error. The model is not mutated.
std::vector<ScoreRecord> score_dataset(
    const Model& m, const Dataset& data, int epoch, double beta,
    const std::function<const ProbVector&(std::size_t)>& teacher_lookup);

// CSV dump of one scoring pass: epoch,sample_id,d_evs,d_ds,d_acs.
void write_scores_csv(const std::string& path,
                      const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> load_scores_csv(const std::string& path);

} // namespace acs
