#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "acs/csv.hpp"
#include "acs/errors.hpp"
#include "acs/experiment.hpp"

namespace {

// Options shared by every verb. Each override only takes effect when it
// was actually passed, so config files stay authoritative otherwise.
struct CommonOpts {
    std::string config_path;
    double fraction = 0.0;
    int interval = 0;
    std::string strategy;
    std::string selector;
    double noise = 0.0;
    std::uint64_t seed = 0;
    bool no_kd = false;
    std::string out;

    CLI::Option* config = nullptr;
    CLI::Option* fraction_opt = nullptr;
    CLI::Option* interval_opt = nullptr;
    CLI::Option* strategy_opt = nullptr;
    CLI::Option* selector_opt = nullptr;
    CLI::Option* noise_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* out_opt = nullptr;
};

void add_common(CLI::App* sub, CommonOpts& o, bool config_required) {
    o.config = sub->add_option("--config", o.config_path,
                               "JSON run configuration file");
    if (config_required) {
        o.config->required()->check(CLI::ExistingFile);
    }
    o.fraction_opt =
        sub->add_option("--fraction", o.fraction, "Kept fraction S in (0, 1]");
    o.interval_opt = sub->add_option("--interval", o.interval,
                                     "Reselection interval R in epochs");
    o.strategy_opt = sub->add_option(
        "--strategy", o.strategy,
        "Score annealing strategy (cosine, fixed, linear, sqrt, quadratic, "
        "evs_only, ds_only)");
    o.selector_opt = sub->add_option(
        "--selector", o.selector,
        "Coreset selector (acs, none, random, el2n, forgetting, "
        "full_coverage, imported)");
    o.noise_opt =
        sub->add_option("--noise", o.noise, "Label noise fraction in [0, 1)");
    o.seed_opt = sub->add_option("--seed", o.seed, "Master seed");
    sub->add_flag("--no-kd", o.no_kd,
                  "Train on hard labels without a teacher");
    o.out_opt = sub->add_option("--out", o.out, "Output directory");
}

acs::RunConfig build_config(const CommonOpts& o) {
    acs::RunConfig cfg;
    if (o.config->count() > 0) {
        cfg = acs::load_run_config(o.config_path);
    }
    if (o.fraction_opt->count() > 0) cfg.fraction = o.fraction;
    if (o.interval_opt->count() > 0) cfg.interval = o.interval;
    if (o.strategy_opt->count() > 0) {
        cfg.annealing = acs::annealing_from_string(o.strategy);
    }
    if (o.selector_opt->count() > 0) {
        cfg.selector = acs::selector_from_string(o.selector);
    }
    if (o.noise_opt->count() > 0) cfg.noise = o.noise;
    if (o.seed_opt->count() > 0) cfg.seed = o.seed;
    if (o.no_kd) cfg.kd = false;
    if (o.out_opt->count() > 0) cfg.out_dir = o.out;
    return cfg;
}

void print_timing(const acs::TimingBreakdown& t) {
    std::cout << "selection_time_s=" << acs::format_double(t.selection_s) << "\n"
              << "training_time_s=" << acs::format_double(t.training_s) << "\n"
              << "total_time_s=" << acs::format_double(t.total_s) << "\n";
}

std::string strip_category(std::string msg, const std::string& category) {
    const std::string prefix = category + ": ";
    if (msg.rfind(prefix, 0) == 0) {
        msg = msg.substr(prefix.size());
    }
    return msg;
}

int fail(const std::string& category, const std::string& what) {
    std::cerr << "error: " << category << ": " << strip_category(what, category)
              << std::endl;
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantization-aware training with adaptive coreset selection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "acs 0.1.0");

    CommonOpts run_opts;
    CLI::App* run_cmd =
        app.add_subcommand("run", "Run one QAT experiment end to end");
    add_common(run_cmd, run_opts, true);

    CommonOpts teach_opts;
    CLI::App* teach_cmd = app.add_subcommand(
        "train-teacher", "Train only the full-precision teacher");
    add_common(teach_cmd, teach_opts, true);

    CommonOpts sweep_opts;
    std::string sweep_axis;
    std::vector<std::string> sweep_values;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "Run one experiment per value of an axis");
    add_common(sweep_cmd, sweep_opts, true);
    sweep_cmd->add_option("--axis", sweep_axis,
                          "Swept axis: S, R, strategy or selector")
        ->required();
    sweep_cmd->add_option("--values", sweep_values, "Comma-separated values")
        ->required()
        ->delimiter(',');

    CommonOpts overlap_opts;
    std::string overlap_a;
    std::string overlap_b;
    CLI::App* overlap_cmd = app.add_subcommand(
        "overlap", "Percentage of one saved coreset found in another");
    add_common(overlap_cmd, overlap_opts, false);
    overlap_cmd->add_option("--a", overlap_a, "First coreset file")
        ->required()
        ->check(CLI::ExistingFile);
    overlap_cmd->add_option("--b", overlap_b, "Second coreset file")
        ->required()
        ->check(CLI::ExistingFile);

    CommonOpts hist_opts;
    std::string hist_scores;
    int hist_epoch = 0;
    std::size_t hist_bins = 20;
    std::string hist_column = "acs";
    std::string hist_out;
    CLI::App* hist_cmd = app.add_subcommand(
        "histogram", "Bin one epoch of a score dump into a histogram CSV");
    add_common(hist_cmd, hist_opts, false);
    hist_cmd->add_option("--scores", hist_scores, "Score dump CSV")
        ->required()
        ->check(CLI::ExistingFile);
    hist_cmd->add_option("--epoch", hist_epoch, "Epoch to bin")->required();
    hist_cmd->add_option("--bins", hist_bins, "Number of fixed-width bins");
    hist_cmd->add_option("--column", hist_column,
                         "Score column: evs, ds or acs");
    hist_cmd->add_option("--hist-out", hist_out,
                         "Histogram CSV path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        fail("cli", e.what());
        return e.get_exit_code();
    }

    try {
        if (app.got_subcommand(run_cmd)) {
            const acs::RunConfig cfg = build_config(run_opts);
            const acs::RunResult r = acs::run_qat(cfg);
            std::cout << "final_train_acc="
                      << acs::format_double(r.final_train_acc) << "\n"
                      << "final_test_acc="
                      << acs::format_double(r.final_test_acc) << "\n";
            if (r.final_noisy_recall >= 0.0) {
                std::cout << "noisy_recall="
                          << acs::format_double(r.final_noisy_recall) << "\n";
            }
            print_timing(acs::timing_breakdown(r.metrics));
        } else if (app.got_subcommand(teach_cmd)) {
            const acs::RunConfig cfg = build_config(teach_opts);
            const acs::TeacherResult r = acs::run_teacher_only(cfg);
            std::cout << "final_train_acc="
                      << acs::format_double(r.final_train_acc) << "\n"
                      << "final_test_acc="
                      << acs::format_double(r.final_test_acc) << "\n"
                      << "total_time_s="
                      << acs::format_double(r.metrics.total_time_s) << "\n";
        } else if (app.got_subcommand(sweep_cmd)) {
            const acs::RunConfig cfg = build_config(sweep_opts);
            const auto entries = acs::run_sweep(cfg, sweep_axis, sweep_values);
            for (const auto& e : entries) {
                std::cout << "axis=" << e.axis << " value=" << e.value
                          << " status=" << (e.ok ? "ok" : "failed")
                          << " final_test_acc="
                          << acs::format_double(e.final_test_acc)
                          << " total_time_s="
                          << acs::format_double(e.timing.total_s) << "\n";
            }
            if (!cfg.out_dir.empty()) {
                const std::string path = cfg.out_dir + "/summary.csv";
                acs::write_summary_csv(path, entries);
                std::cout << "summary=" << path << "\n";
            }
        } else if (app.got_subcommand(overlap_cmd)) {
            const acs::Coreset a = acs::load_coreset(overlap_a);
            const acs::Coreset b = acs::load_coreset(overlap_b);
            std::cout << "overlap_percent="
                      << acs::format_double(
                             acs::coreset_overlap_percent(a, b))
                      << "\n";
        } else if (app.got_subcommand(hist_cmd)) {
            const auto records = acs::load_scores_csv(hist_scores);
            const auto counts = acs::score_histogram(
                records, hist_epoch, hist_bins,
                acs::score_column_from_string(hist_column));
            if (hist_out.empty()) {
                const double hi = std::sqrt(2.0);
                const double width = hi / static_cast<double>(counts.size());
                std::cout << "bin_lo,bin_hi,count\n";
                for (std::size_t i = 0; i < counts.size(); ++i) {
                    std::cout
                        << acs::format_double(static_cast<double>(i) * width)
                        << ','
                        << acs::format_double(
                               i + 1 == counts.size()
                                   ? hi
                                   : static_cast<double>(i + 1) * width)
                        << ',' << counts[i] << "\n";
                }
            } else {
                acs::write_histogram_csv(hist_out, counts);
                std::cout << "histogram=" << hist_out << "\n";
            }
        }
    } catch (const acs::ConfigError& e) {
        return fail("config", e.what());
    } catch (const acs::FormatError& e) {
        return fail("format", e.what());
    } catch (const acs::InputError& e) {
        return fail("input", e.what());
    } catch (const acs::DomainError& e) {
        return fail("domain", e.what());
    } catch (const acs::DimensionError& e) {
        return fail("dimension", e.what());
    } catch (const acs::StateError& e) {
        return fail("state", e.what());
    } catch (const acs::RunError& e) {
        return fail("run", e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 0;
}
