#pragma once

#include "riskbo/core.hpp"
#include "riskbo/guided_bo.hpp"
#include "riskbo/objectives.hpp"
#include "riskbo/testing.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace riskbo::experiment {

enum class Method { guided, uniform, random_lhs, plain_hvi };

std::string_view method_name(Method m);
Method method_from_name(std::string_view name);

/// Where losses come from: a builtin synthetic family, a loss-table
/// manifest, or a subprocess command.
struct ProviderSpec {
    enum class Kind { synthetic, table, subprocess };
    Kind kind = Kind::synthetic;
    std::string preset = "fairness-like";  // synthetic
    objectives::NoiseKind noise = objectives::NoiseKind::bernoulli;
    std::string manifest;                  // table
    std::string command;                   // subprocess
    int dim = 1;                           // subprocess
    int constrained = 1;                   // subprocess
    std::vector<double> lower;             // subprocess box
    std::vector<double> upper;
    double timeout_s = 3600.0;
};

std::unique_ptr<objectives::ObjectiveProvider> make_provider(const ProviderSpec& spec);

struct ExperimentConfig {
    ProviderSpec provider;
    RiskSpec risk;
    bo::BOConfig bo;
    std::vector<Method> methods = {Method::guided};
    std::vector<std::vector<double>> alpha_grid;  // empty -> just risk.alphas
    int trials = 1;
    std::size_t k = 0;       // validation samples (0 -> provider requirement)
    std::size_t m = 0;       // calibration samples
    std::size_t n_test = 0;  // test samples (0 -> m)
    int jobs = 1;
    bool resample_validation = false;
    std::uint64_t seed = 0;
    std::string out_dir;

    void validate() const;
};

struct TrialRow {
    int trial = 0;
    bool failed = false;
    std::string error;
    bool null_selection = true;
    bool degenerate = false;
    std::vector<double> chosen_lambda;
    std::vector<double> val_means;
    std::vector<double> test_means;
    double chosen_cal_p = 1.0;
    std::optional<bool> violation;  // synthetic providers only
};

struct Aggregates {
    int trials = 0;
    int failed = 0;
    int nulls = 0;
    double null_rate = 0.0;
    double violation_rate = 0.0;  // violations over all non-failed selections
    bool has_violations = false;
    // over non-null selections
    double free_mean = 0.0;
    double free_ci95 = 0.0;
    std::vector<double> test_mean;  // per objective
    std::vector<double> test_ci95;
};

Aggregates aggregate_rows(const std::vector<TrialRow>& rows, int num_objectives);

struct GroupReport {
    std::vector<double> alphas;
    Method method = Method::guided;
    int budget = 0;
    std::vector<TrialRow> rows;
    Aggregates aggregates;
    // stage-1 artifacts of the shared (fixed-validation) first stage
    std::vector<bo::IterationLogEntry> iterations;
    std::string selection_report;  // JSON of trial 0
};

struct RunReport {
    std::uint64_t seed = 0;
    int trials = 0;
    std::string provider;
    std::vector<GroupReport> groups;
};

/// One group per (alpha vector, method): the first stage runs on fixed
/// validation data, then every trial re-draws calibration and test data
/// and repeats the identical testing stage. Trials run on a --jobs pool;
/// rows are keyed by trial index so parallelism never changes output.
RunReport run_experiment(const ExperimentConfig& config);

struct FwerSummary {
    double delta = 0.0;
    int trials = 0;
    int nulls = 0;
    int violations = 0;
    double rate = 0.0;
    double ci_low = 0.0;   // exact (Clopper-Pearson) 95% interval
    double ci_high = 0.0;
};

/// Repeats the selection across trials with independent calibration draws
/// and counts selections whose true means violate any constraint.
/// Requires a synthetic provider.
FwerSummary run_fwer_study(const ExperimentConfig& config);

/// Shared-seed runs across ascending budgets; the initial pool shrinks to
/// budget/2 when a budget cannot cover the configured one.
RunReport run_budget_sweep(const ExperimentConfig& config,
                           const std::vector<int>& budgets);

/// Parses the config-file document (the same keys the CLI flags mirror).
ExperimentConfig config_from_json_string(const std::string& text);

std::string report_to_json(const RunReport& report);
std::string report_to_csv(const RunReport& report, int num_objectives);

/// Writes results.json, results.csv, and the per-group stage-1 artifacts.
void emit_results(const RunReport& report, int num_objectives,
                  const std::string& out_dir);

/// Exact binomial confidence interval helper for violation rates.
struct BinomialCi {
    double low = 0.0;
    double high = 1.0;
};
BinomialCi clopper_pearson(int successes, int trials, double level = 0.95);

}  // namespace riskbo::experiment
