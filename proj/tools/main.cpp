#include "riskbo/experiment.hpp"
#include "riskbo/random.hpp"
#include "riskbo/guided_bo.hpp"
#include "riskbo/objectives.hpp"
#include "riskbo/pareto.hpp"
#include "riskbo/testing.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using riskbo::experiment::ExperimentConfig;
using riskbo::experiment::ProviderSpec;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitProviderError = 3;
constexpr int kExitAllNull = 4;

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string field;
    while (std::getline(ss, field, ',')) {
        if (!field.empty()) out.push_back(std::stod(field));
    }
    return out;
}

std::vector<std::string> parse_string_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string field;
    while (std::getline(ss, field, ',')) {
        if (!field.empty()) out.push_back(field);
    }
    return out;
}

// Flags mirror config keys; a flag that was passed overrides the file.
struct CliOverrides {
    std::string config_path;
    std::string problem;
    std::string manifest;
    std::string command;
    int dim = 0;
    int constrained = 0;
    std::string lower;
    std::string upper;
    double timeout_s = 0.0;
    std::string alpha;
    double delta = 0.0;
    double delta_prime = 0.0;
    std::string bound;
    int budget = 0;
    int init = 0;
    std::string method;
    int trials = 0;
    long k = 0;
    long m = 0;
    long n_test = 0;
    std::uint64_t seed = 0;
    int jobs = 0;
    std::string out;
};

void add_common_options(CLI::App* cmd, CliOverrides& o) {
    cmd->add_option("--config", o.config_path, "JSON config file");
    cmd->add_option("--problem", o.problem, "builtin synthetic problem name");
    cmd->add_option("--manifest", o.manifest, "loss-table manifest path");
    cmd->add_option("--command", o.command, "subprocess objective command");
    cmd->add_option("--dim", o.dim, "search dimension (subprocess provider)");
    cmd->add_option("--constrained", o.constrained,
                    "constrained objective count (subprocess provider)");
    cmd->add_option("--lower", o.lower, "comma-separated lower bounds (subprocess)");
    cmd->add_option("--upper", o.upper, "comma-separated upper bounds (subprocess)");
    cmd->add_option("--timeout-s", o.timeout_s, "subprocess timeout in seconds");
    cmd->add_option("--alpha", o.alpha, "comma-separated per-constraint limits");
    cmd->add_option("--delta", o.delta, "certification confidence level");
    cmd->add_option("--delta-prime", o.delta_prime, "region width level");
    cmd->add_option("--bound", o.bound, "hoeffding or hb");
    cmd->add_option("--budget", o.budget, "total evaluation budget N");
    cmd->add_option("--init", o.init, "initial pool size N0");
    cmd->add_option("--method", o.method,
                    "comma-separated methods: guided,uniform,random_lhs,plain_hvi");
    cmd->add_option("--trials", o.trials, "number of calibration/test resamples");
    cmd->add_option("--k", o.k, "validation sample count");
    cmd->add_option("--m", o.m, "calibration sample count");
    cmd->add_option("--n-test", o.n_test, "test sample count");
    cmd->add_option("--seed", o.seed, "run seed");
    cmd->add_option("--jobs", o.jobs, "parallel trial workers");
    cmd->add_option("--out", o.out, "output directory");
}

json merged_config(const CLI::App* cmd, const CliOverrides& o) {
    json doc = json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw std::invalid_argument("cannot open config " + o.config_path);
        doc = json::parse(in);
    }
    const auto passed = [&](const std::string& flag) {
        return cmd->count(flag) > 0;
    };
    if (passed("--problem")) doc["problem"] = o.problem;
    if (passed("--manifest")) doc["manifest"] = o.manifest;
    if (passed("--command")) doc["command"] = o.command;
    if (passed("--dim")) doc["dim"] = o.dim;
    if (passed("--constrained")) doc["constrained"] = o.constrained;
    if (passed("--lower")) doc["lower"] = parse_double_list(o.lower);
    if (passed("--upper")) doc["upper"] = parse_double_list(o.upper);
    if (passed("--timeout-s")) doc["timeout_s"] = o.timeout_s;
    if (passed("--alpha")) doc["alphas"] = parse_double_list(o.alpha);
    if (passed("--delta")) doc["delta"] = o.delta;
    if (passed("--delta-prime")) doc["delta_prime"] = o.delta_prime;
    if (passed("--bound")) doc["bound"] = o.bound;
    if (passed("--budget")) doc["budget"] = o.budget;
    if (passed("--init")) doc["init"] = o.init;
    if (passed("--method")) doc["methods"] = parse_string_list(o.method);
    if (passed("--trials")) doc["trials"] = o.trials;
    if (passed("--k")) doc["k"] = o.k;
    if (passed("--m")) doc["m"] = o.m;
    if (passed("--n-test")) doc["n_test"] = o.n_test;
    if (passed("--seed")) doc["seed"] = o.seed;
    if (passed("--jobs")) doc["jobs"] = o.jobs;
    if (passed("--out")) doc["out"] = o.out;
    return doc;
}

ExperimentConfig config_from_json(const json& doc) {
    return riskbo::experiment::config_from_json_string(doc.dump());
}

bool all_selections_null(const riskbo::experiment::RunReport& report) {
    bool saw_selection = false;
    for (const auto& group : report.groups) {
        for (const auto& row : group.rows) {
            if (row.failed) continue;
            saw_selection = true;
            if (!row.null_selection) return false;
        }
    }
    return saw_selection;
}

void print_group_summary(const riskbo::experiment::RunReport& report) {
    for (const auto& group : report.groups) {
        const auto& a = group.aggregates;
        std::cout << method_name(group.method) << " alphas=[";
        for (std::size_t i = 0; i < group.alphas.size(); ++i) {
            if (i) std::cout << ",";
            std::cout << group.alphas[i];
        }
        std::cout << "] budget=" << group.budget << " trials=" << a.trials
                  << " nulls=" << a.nulls << " null_rate=" << a.null_rate;
        if (a.has_violations) std::cout << " violation_rate=" << a.violation_rate;
        std::cout << " free_mean=" << a.free_mean << " +-" << a.free_ci95 << "\n";
    }
}

int cmd_run(const CLI::App* cmd, const CliOverrides& o, bool sweep,
            const std::string& budgets_text) {
    ExperimentConfig config = config_from_json(merged_config(cmd, o));
    riskbo::experiment::RunReport report;
    if (sweep) {
        std::vector<int> budgets;
        for (double b : parse_double_list(budgets_text)) {
            budgets.push_back(static_cast<int>(b));
        }
        report = riskbo::experiment::run_budget_sweep(config, budgets);
    } else {
        report = riskbo::experiment::run_experiment(config);
    }
    const auto provider = riskbo::experiment::make_provider(config.provider);
    const std::string out_dir =
        config.out_dir.empty() ? "riskbo_out" : config.out_dir;
    riskbo::experiment::emit_results(report, provider->num_objectives(), out_dir);
    print_group_summary(report);
    std::cout << "results written to " << out_dir << "\n";
    if (all_selections_null(report)) {
        std::cerr << "no statistically valid configuration found in any trial\n";
        return kExitAllNull;
    }
    return kExitOk;
}

int cmd_fwer(const CLI::App* cmd, const CliOverrides& o) {
    ExperimentConfig config = config_from_json(merged_config(cmd, o));
    const auto summary = riskbo::experiment::run_fwer_study(config);
    json doc;
    doc["delta"] = summary.delta;
    doc["trials"] = summary.trials;
    doc["nulls"] = summary.nulls;
    doc["violations"] = summary.violations;
    doc["rate"] = summary.rate;
    doc["ci_low"] = summary.ci_low;
    doc["ci_high"] = summary.ci_high;
    std::cout << doc.dump(2) << "\n";
    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        std::ofstream out(std::filesystem::path(config.out_dir) / "fwer.json");
        out << doc.dump(2);
    }
    return kExitOk;
}

int cmd_hv(const std::string& points_path, long mc_samples, std::uint64_t seed) {
    std::ifstream in(points_path);
    if (!in) throw std::invalid_argument("cannot open points file " + points_path);
    json doc = json::parse(in);
    if (!doc.contains("points") || !doc.contains("reference")) {
        throw std::invalid_argument("points file needs 'points' and 'reference'");
    }
    std::vector<riskbo::pareto::ObjectivePoint> points;
    for (const auto& p : doc["points"]) {
        points.emplace_back(p.get<std::vector<double>>());
    }
    const auto reference = doc["reference"].get<std::vector<double>>();

    json out;
    out["hypervolume"] = riskbo::pareto::hypervolume(points, reference);
    if (mc_samples > 0) {
        const auto est = riskbo::pareto::hypervolume_mc(
            points, reference, static_cast<std::size_t>(mc_samples), seed);
        out["mc_estimate"] = est.value;
        out["mc_std_error"] = est.std_error;
    }
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

int cmd_suggest_alpha(const CLI::App* cmd, const CliOverrides& o) {
    ExperimentConfig config = config_from_json(merged_config(cmd, o));
    const auto provider = riskbo::experiment::make_provider(config.provider);
    const std::size_t k =
        config.k ? config.k : provider->required_samples(riskbo::Split::validation);
    if (k < 2) throw std::invalid_argument("need --k to evaluate the pool");

    const auto pool = riskbo::bo::sample_initial_pool(
        provider->space(), config.bo.init_size,
        riskbo::derive_seed(config.seed, "init"));
    std::vector<riskbo::EvalRecord> records;
    for (const auto& cfg : pool) {
        records.push_back(riskbo::objectives::evaluate_record(
            *provider, cfg, k, riskbo::derive_seed(config.seed, "val")));
    }
    const auto intervals = riskbo::testing::suggest_alpha_range(
        records, provider->num_constrained());
    json doc = json::array();
    for (const auto& interval : intervals) {
        doc.push_back({{"low", interval.low}, {"high", interval.high}});
    }
    std::cout << doc.dump(2) << "\n";
    return kExitOk;
}

int cmd_validate_manifest(const std::string& path) {
    try {
        const auto provider = riskbo::objectives::load_table_objective(path);
        std::cout << "ok: " << provider->finite_points().size()
                  << " configurations, " << provider->num_constrained()
                  << " constrained objectives\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"risk-controlled configuration selection"};
    app.require_subcommand(1);

    CliOverrides run_opts;
    auto* run_cmd = app.add_subcommand("run", "run an experiment");
    add_common_options(run_cmd, run_opts);

    CliOverrides fwer_opts;
    auto* fwer_cmd =
        app.add_subcommand("fwer", "estimate the violation rate on a synthetic problem");
    add_common_options(fwer_cmd, fwer_opts);

    CliOverrides sweep_opts;
    std::string budgets_text;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a budget sweep");
    add_common_options(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--budgets", budgets_text, "comma-separated budgets")
        ->required();

    std::string hv_points;
    long hv_mc = 0;
    std::uint64_t hv_seed = 0;
    auto* hv_cmd = app.add_subcommand("hv", "hypervolume of a points file");
    hv_cmd->add_option("--points", hv_points, "JSON file with points and reference")
        ->required();
    hv_cmd->add_option("--mc", hv_mc, "Monte Carlo sample count (optional check)");
    hv_cmd->add_option("--seed", hv_seed, "Monte Carlo seed");

    CliOverrides suggest_opts;
    auto* suggest_cmd =
        app.add_subcommand("suggest-alpha", "feasible alpha ranges from an initial pool");
    add_common_options(suggest_cmd, suggest_opts);

    std::string manifest_path;
    auto* validate_cmd =
        app.add_subcommand("validate-manifest", "check a loss-table manifest");
    validate_cmd->add_option("path", manifest_path, "manifest path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfigError;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(run_cmd, run_opts, false, "");
        if (fwer_cmd->parsed()) return cmd_fwer(fwer_cmd, fwer_opts);
        if (sweep_cmd->parsed()) return cmd_run(sweep_cmd, sweep_opts, true, budgets_text);
        if (hv_cmd->parsed()) return cmd_hv(hv_points, hv_mc, hv_seed);
        if (suggest_cmd->parsed()) return cmd_suggest_alpha(suggest_cmd, suggest_opts);
        if (validate_cmd->parsed()) return cmd_validate_manifest(manifest_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return kExitProviderError;
    }
    return kExitOk;
}
