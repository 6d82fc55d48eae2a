#include "riskbo/experiment.hpp"

#include "riskbo/random.hpp"
#include "riskbo/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace riskbo::experiment {

using nlohmann::json;

std::string_view method_name(Method m) {
    switch (m) {
        case Method::guided: return "guided";
        case Method::uniform: return "uniform";
        case Method::random_lhs: return "random_lhs";
        case Method::plain_hvi: return "plain_hvi";
    }
    return "unknown";
}

Method method_from_name(std::string_view name) {
    if (name == "guided") return Method::guided;
    if (name == "uniform") return Method::uniform;
    if (name == "random_lhs" || name == "random") return Method::random_lhs;
    if (name == "plain_hvi" || name == "hvi") return Method::plain_hvi;
    throw std::invalid_argument("unknown method: " + std::string(name));
}

std::unique_ptr<objectives::ObjectiveProvider> make_provider(const ProviderSpec& spec) {
    switch (spec.kind) {
        case ProviderSpec::Kind::synthetic:
            return objectives::make_builtin_problem(spec.preset, spec.noise);
        case ProviderSpec::Kind::table:
            return objectives::load_table_objective(spec.manifest);
        case ProviderSpec::Kind::subprocess: {
            Eigen::VectorXd lower =
                Eigen::Map<const Eigen::VectorXd>(spec.lower.data(), spec.lower.size());
            Eigen::VectorXd upper =
                Eigen::Map<const Eigen::VectorXd>(spec.upper.data(), spec.upper.size());
            return std::make_unique<objectives::SubprocessProvider>(
                spec.command, SearchSpace(lower, upper), spec.constrained,
                spec.timeout_s);
        }
    }
    throw std::invalid_argument("unknown provider kind");
}

void ExperimentConfig::validate() const {
    risk.validate();
    bo.validate();
    if (trials < 1) throw std::invalid_argument("trials must be positive");
    if (methods.empty()) throw std::invalid_argument("need at least one method");
    for (const auto& alphas : alpha_grid) {
        if (alphas.size() != risk.alphas.size()) {
            throw std::invalid_argument("alpha grid entries must match the constraint count");
        }
    }
    if (jobs < 1) throw std::invalid_argument("jobs must be positive");
}

namespace {

struct StageOne {
    stats::RegionOfInterest region;
    std::vector<EvalRecord> records;
    std::vector<bo::IterationLogEntry> iterations;
};

std::vector<Eigen::VectorXd> uniform_grid_unit(int dim, int budget) {
    std::vector<Eigen::VectorXd> points;
    if (dim == 1) {
        for (int i = 0; i < budget; ++i) {
            Eigen::VectorXd p(1);
            p[0] = budget == 1 ? 0.5
                               : static_cast<double>(i) / static_cast<double>(budget - 1);
            points.push_back(p);
        }
        return points;
    }
    // largest per-axis level count whose full grid fits the budget
    int levels = 1;
    while (true) {
        long total = 1;
        for (int j = 0; j < dim; ++j) total *= levels + 1;
        if (total > budget) break;
        ++levels;
    }
    std::vector<int> index(dim, 0);
    while (true) {
        Eigen::VectorXd p(dim);
        for (int j = 0; j < dim; ++j) {
            p[j] = levels == 1
                       ? 0.5
                       : static_cast<double>(index[j]) / static_cast<double>(levels - 1);
        }
        points.push_back(p);
        int j = 0;
        while (j < dim && ++index[j] == levels) {
            index[j] = 0;
            ++j;
        }
        if (j == dim) break;
    }
    return points;
}

StageOne run_stage_one(const objectives::ObjectiveProvider& provider,
                       const SearchSpace& space, const RiskSpec& risk,
                       const bo::BOConfig& bo_config, Method method,
                       std::size_t k, std::size_t m, std::uint64_t stage_seed,
                       std::uint64_t val_seed) {
    StageOne stage;
    bo::BOConfig bo = bo_config;
    bo.seed = stage_seed;

    switch (method) {
        case Method::guided:
        case Method::plain_hvi: {
            stage.region =
                method == Method::guided
                    ? stats::region_of_interest(risk, static_cast<long>(k),
                                                static_cast<long>(m))
                    : stats::whole_space_region(risk, static_cast<long>(k),
                                                static_cast<long>(m));
            auto result = bo::run_bo(provider, space, risk, stage.region, bo, k, val_seed);
            if (!result.completed) {
                throw std::runtime_error("optimization aborted: " + result.error);
            }
            stage.records = std::move(result.records);
            stage.iterations = std::move(result.log);
            break;
        }
        case Method::uniform:
        case Method::random_lhs: {
            stage.region = stats::region_of_interest(risk, static_cast<long>(k),
                                                     static_cast<long>(m));
            std::vector<Configuration> configs;
            if (method == Method::uniform) {
                const auto unit = uniform_grid_unit(space.dim(), bo.budget);
                configs = bo::project_candidates(provider, space, unit, 0);
            } else {
                auto pool = bo::sample_initial_pool(space, bo.budget,
                                                    derive_seed(stage_seed, "init"));
                if (provider.finite_points().empty()) {
                    configs = std::move(pool);
                } else {
                    std::vector<Eigen::VectorXd> unit;
                    unit.reserve(pool.size());
                    for (const auto& cfg : pool) unit.push_back(space.to_unit(cfg.values));
                    configs = bo::project_candidates(provider, space, unit, 0);
                }
            }
            for (const auto& cfg : configs) {
                stage.records.push_back(
                    objectives::evaluate_record(provider, cfg, k, val_seed));
            }
            break;
        }
    }
    return stage;
}

TrialRow run_trial(const objectives::ObjectiveProvider& provider,
                   const RiskSpec& risk, const StageOne& stage, std::size_t k,
                   std::size_t m, std::size_t n_test, int trial,
                   std::uint64_t run_seed) {
    TrialRow row;
    row.trial = trial;
    try {
        const std::uint64_t cal_seed = derive_seed(run_seed, "cal", trial);
        auto report = testing::certify(stage.records, provider, risk, stage.region,
                                       k, m, cal_seed);
        row.degenerate = report.result.degenerate;
        if (report.result.chosen) {
            row.null_selection = false;
            const auto& chosen = *report.result.chosen;
            row.chosen_lambda.assign(chosen.values.data(),
                                     chosen.values.data() + chosen.values.size());
            for (const auto& rec : report.records) {
                if (rec.config.id == chosen.id) {
                    row.val_means = rec.val_means;
                    break;
                }
            }
            for (const auto& t : report.tests) {
                if (t.config_id == chosen.id && t.cal_p) {
                    row.chosen_cal_p = *t.cal_p;
                    break;
                }
            }
            const std::uint64_t test_seed = derive_seed(run_seed, "test", trial);
            try {
                const auto samples =
                    provider.evaluate(chosen, Split::test, n_test, test_seed);
                row.test_means = samples.means();
            } catch (const std::exception&) {
                // providers without a test split simply omit test means
            }
            if (provider.has_true_means()) {
                const auto mu = provider.true_means(chosen.values);
                bool violated = false;
                for (std::size_t i = 0; i < risk.alphas.size(); ++i) {
                    violated |= mu[i] > risk.alphas[i];
                }
                row.violation = violated;
            }
        } else {
            row.null_selection = true;
            if (provider.has_true_means()) row.violation = false;
        }
    } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
    }
    return row;
}

}  // namespace

Aggregates aggregate_rows(const std::vector<TrialRow>& rows, int num_objectives) {
    Aggregates agg;
    agg.trials = static_cast<int>(rows.size());
    int violations = 0;
    std::vector<double> free_values;
    std::vector<std::vector<double>> per_objective(num_objectives);
    for (const auto& row : rows) {
        if (row.failed) {
            ++agg.failed;
            continue;
        }
        if (row.null_selection) {
            ++agg.nulls;
        } else if (!row.test_means.empty()) {
            free_values.push_back(row.test_means.back());
            for (int i = 0; i < num_objectives; ++i) {
                per_objective[i].push_back(row.test_means[i]);
            }
        }
        if (row.violation && *row.violation) ++violations;
        if (row.violation) agg.has_violations = true;
    }
    const int selections = agg.trials - agg.failed;
    agg.null_rate = selections > 0 ? static_cast<double>(agg.nulls) / selections : 0.0;
    agg.violation_rate =
        selections > 0 ? static_cast<double>(violations) / selections : 0.0;

    const auto mean_ci = [](const std::vector<double>& values) {
        std::pair<double, double> out{0.0, 0.0};
        if (values.empty()) return out;
        double sum = 0.0;
        for (double v : values) sum += v;
        const double mean = sum / static_cast<double>(values.size());
        out.first = mean;
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
            out.second = 1.96 * sd / std::sqrt(static_cast<double>(values.size()));
        }
        return out;
    };

    const auto [fm, fc] = mean_ci(free_values);
    agg.free_mean = fm;
    agg.free_ci95 = fc;
    agg.test_mean.resize(num_objectives, 0.0);
    agg.test_ci95.resize(num_objectives, 0.0);
    for (int i = 0; i < num_objectives; ++i) {
        const auto [m0, c0] = mean_ci(per_objective[i]);
        agg.test_mean[i] = m0;
        agg.test_ci95[i] = c0;
    }
    return agg;
}

RunReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto provider = make_provider(config.provider);
    const SearchSpace& space = provider->space();

    std::size_t k = config.k ? config.k : provider->required_samples(Split::validation);
    std::size_t m = config.m ? config.m : provider->required_samples(Split::calibration);
    if (k < 2 || m < 2) {
        throw std::invalid_argument("validation and calibration sizes must be set (>= 2)");
    }
    const std::size_t n_test =
        config.n_test ? config.n_test
                      : (provider->required_samples(Split::test)
                             ? provider->required_samples(Split::test)
                             : m);

    std::vector<std::vector<double>> alpha_grid = config.alpha_grid;
    if (alpha_grid.empty()) alpha_grid.push_back(config.risk.alphas);

    RunReport report;
    report.seed = config.seed;
    report.trials = config.trials;
    report.provider = provider->name();

    const std::uint64_t fixed_val_seed = derive_seed(config.seed, "val");

    for (std::size_t ai = 0; ai < alpha_grid.size(); ++ai) {
        RiskSpec risk = config.risk;
        risk.alphas = alpha_grid[ai];
        const std::uint64_t stage_seed = derive_seed(config.seed, "stage1", ai);

        for (Method method : config.methods) {
            GroupReport group;
            group.alphas = risk.alphas;
            group.method = method;
            group.budget = config.bo.budget;
            group.rows.resize(config.trials);

            std::shared_ptr<const StageOne> shared_stage;
            std::string stage_error;
            if (!config.resample_validation) {
                try {
                    shared_stage = std::make_shared<StageOne>(
                        run_stage_one(*provider, space, risk, config.bo, method, k, m,
                                      stage_seed, fixed_val_seed));
                } catch (const std::exception& e) {
                    stage_error = e.what();
                }
            }

            if (!stage_error.empty()) {
                for (int t = 0; t < config.trials; ++t) {
                    group.rows[t].trial = t;
                    group.rows[t].failed = true;
                    group.rows[t].error = stage_error;
                }
            } else {
                std::atomic<int> next{0};
                const auto worker = [&]() {
                    while (true) {
                        const int t = next.fetch_add(1);
                        if (t >= config.trials) break;
                        const StageOne* stage = shared_stage.get();
                        StageOne local;
                        if (config.resample_validation) {
                            try {
                                local = run_stage_one(
                                    *provider, space, risk, config.bo, method, k, m,
                                    derive_seed(stage_seed, "trial", t),
                                    derive_seed(config.seed, "val", t));
                                stage = &local;
                            } catch (const std::exception& e) {
                                group.rows[t].trial = t;
                                group.rows[t].failed = true;
                                group.rows[t].error = e.what();
                                continue;
                            }
                        }
                        group.rows[t] = run_trial(*provider, risk, *stage, k, m,
                                                  n_test, t, config.seed);
                    }
                };
                const int n_threads = std::min(config.jobs, config.trials);
                if (n_threads <= 1) {
                    worker();
                } else {
                    std::vector<std::thread> threads;
                    for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
                    for (auto& th : threads) th.join();
                }

                if (shared_stage) {
                    group.iterations = shared_stage->iterations;
                    auto trial0 = testing::certify(shared_stage->records, *provider,
                                                   risk, shared_stage->region, k, m,
                                                   derive_seed(config.seed, "cal", 0));
                    trial0.iterations = shared_stage->iterations;
                    group.selection_report = testing::selection_report_json(trial0);
                }
            }

            group.aggregates =
                aggregate_rows(group.rows, provider->num_objectives());
            report.groups.push_back(std::move(group));
        }
    }
    return report;
}

FwerSummary run_fwer_study(const ExperimentConfig& config) {
    const auto provider = make_provider(config.provider);
    if (!provider->has_true_means()) {
        throw std::invalid_argument("fwer study requires a synthetic provider");
    }
    ExperimentConfig single = config;
    single.alpha_grid.clear();
    single.methods = {config.methods.empty() ? Method::guided : config.methods.front()};
    const RunReport report = run_experiment(single);
    const auto& rows = report.groups.front().rows;

    FwerSummary summary;
    summary.delta = config.risk.delta;
    int selections = 0;
    for (const auto& row : rows) {
        if (row.failed) continue;
        ++selections;
        if (row.null_selection) ++summary.nulls;
        if (row.violation && *row.violation) ++summary.violations;
    }
    summary.trials = selections;
    summary.rate =
        selections > 0 ? static_cast<double>(summary.violations) / selections : 0.0;
    const auto ci = clopper_pearson(summary.violations, selections);
    summary.ci_low = ci.low;
    summary.ci_high = ci.high;
    return summary;
}

RunReport run_budget_sweep(const ExperimentConfig& config,
                           const std::vector<int>& budgets) {
    if (budgets.empty()) throw std::invalid_argument("no budgets given");
    for (std::size_t i = 1; i < budgets.size(); ++i) {
        if (budgets[i] < budgets[i - 1]) {
            throw std::invalid_argument("budgets must be ascending");
        }
    }
    RunReport merged;
    merged.seed = config.seed;
    merged.trials = config.trials;
    for (int budget : budgets) {
        ExperimentConfig cfg = config;
        cfg.bo.budget = budget;
        cfg.bo.init_size = std::min(config.bo.init_size, std::max(2, budget / 2));
        RunReport part = run_experiment(cfg);
        merged.provider = part.provider;
        for (auto& group : part.groups) {
            merged.groups.push_back(std::move(group));
        }
    }
    return merged;
}

namespace {

json row_to_json(const TrialRow& row) {
    json r;
    r["trial"] = row.trial;
    r["failed"] = row.failed;
    if (row.failed) r["error"] = row.error;
    r["null"] = row.null_selection;
    r["degenerate"] = row.degenerate;
    r["lambda"] = row.chosen_lambda;
    r["val_means"] = row.val_means;
    r["test_means"] = row.test_means;
    r["cal_p"] = row.chosen_cal_p;
    if (row.violation) {
        r["violation"] = *row.violation;
    } else {
        r["violation"] = nullptr;
    }
    return r;
}

json aggregates_to_json(const Aggregates& agg) {
    json a;
    a["trials"] = agg.trials;
    a["failed"] = agg.failed;
    a["nulls"] = agg.nulls;
    a["null_rate"] = agg.null_rate;
    a["violation_rate"] = agg.violation_rate;
    a["free_mean"] = agg.free_mean;
    a["free_ci95"] = agg.free_ci95;
    a["test_mean"] = agg.test_mean;
    a["test_ci95"] = agg.test_ci95;
    return a;
}

}  // namespace

ExperimentConfig config_from_json_string(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config parse error: " + std::string(e.what()));
    }
    ExperimentConfig config;
    if (doc.contains("manifest")) {
        config.provider.kind = ProviderSpec::Kind::table;
        config.provider.manifest = doc["manifest"].get<std::string>();
    } else if (doc.contains("command")) {
        config.provider.kind = ProviderSpec::Kind::subprocess;
        config.provider.command = doc["command"].get<std::string>();
        if (!doc.contains("dim") || !doc.contains("constrained") ||
            !doc.contains("lower") || !doc.contains("upper")) {
            throw std::invalid_argument(
                "subprocess provider needs dim, constrained, lower, upper");
        }
        config.provider.dim = doc["dim"].get<int>();
        config.provider.constrained = doc["constrained"].get<int>();
        config.provider.lower = doc["lower"].get<std::vector<double>>();
        config.provider.upper = doc["upper"].get<std::vector<double>>();
        if (doc.contains("timeout_s")) {
            config.provider.timeout_s = doc["timeout_s"].get<double>();
        }
    } else {
        config.provider.kind = ProviderSpec::Kind::synthetic;
        if (doc.contains("problem")) {
            config.provider.preset = doc["problem"].get<std::string>();
        }
        if (doc.contains("noise")) {
            const auto noise = doc["noise"].get<std::string>();
            config.provider.noise = noise == "clipped_gaussian"
                                        ? objectives::NoiseKind::clipped_gaussian
                                        : objectives::NoiseKind::bernoulli;
        }
    }

    if (doc.contains("alphas")) {
        config.risk.alphas = doc["alphas"].get<std::vector<double>>();
    }
    if (doc.contains("alpha_grid")) {
        config.alpha_grid = doc["alpha_grid"].get<std::vector<std::vector<double>>>();
    }
    if (doc.contains("delta")) config.risk.delta = doc["delta"].get<double>();
    if (doc.contains("delta_prime")) {
        config.risk.delta_prime = doc["delta_prime"].get<double>();
    }
    if (doc.contains("bound")) {
        config.risk.bound = bound_from_name(doc["bound"].get<std::string>());
    }
    if (doc.contains("budget")) config.bo.budget = doc["budget"].get<int>();
    if (doc.contains("init")) config.bo.init_size = doc["init"].get<int>();
    if (doc.contains("pool_size")) {
        config.bo.candidate_pool_size = doc["pool_size"].get<int>();
    }
    if (doc.contains("perturbations")) {
        config.bo.perturbation_count = doc["perturbations"].get<int>();
    }
    if (doc.contains("perturbation_sigma")) {
        config.bo.perturbation_sigma = doc["perturbation_sigma"].get<double>();
    }
    if (doc.contains("methods")) {
        config.methods.clear();
        for (const auto& name : doc["methods"]) {
            config.methods.push_back(method_from_name(name.get<std::string>()));
        }
    }
    if (doc.contains("trials")) config.trials = doc["trials"].get<int>();
    if (doc.contains("k")) config.k = doc["k"].get<std::size_t>();
    if (doc.contains("m")) config.m = doc["m"].get<std::size_t>();
    if (doc.contains("n_test")) config.n_test = doc["n_test"].get<std::size_t>();
    if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("jobs")) config.jobs = doc["jobs"].get<int>();
    if (doc.contains("out")) config.out_dir = doc["out"].get<std::string>();
    if (doc.contains("resample_validation")) {
        config.resample_validation = doc["resample_validation"].get<bool>();
    }
    return config;
}

std::string report_to_json(const RunReport& report) {
    json doc;
    doc["seed"] = report.seed;
    doc["trials"] = report.trials;
    doc["provider"] = report.provider;
    json groups = json::array();
    for (const auto& group : report.groups) {
        json g;
        g["alphas"] = group.alphas;
        g["method"] = std::string(method_name(group.method));
        g["budget"] = group.budget;
        json rows = json::array();
        for (const auto& row : group.rows) rows.push_back(row_to_json(row));
        g["rows"] = rows;
        g["aggregates"] = aggregates_to_json(group.aggregates);
        groups.push_back(g);
    }
    doc["groups"] = groups;
    return doc.dump(2);
}

std::string report_to_csv(const RunReport& report, int num_objectives) {
    std::string csv =
        "alpha,method,budget,trials,failed,nulls,null_rate,violation_rate,"
        "free_mean,free_ci95";
    for (int i = 0; i < num_objectives; ++i) {
        csv += ",obj" + std::to_string(i) + "_test_mean,obj" + std::to_string(i) +
               "_test_ci95";
    }
    csv += "\n";
    for (const auto& group : report.groups) {
        std::string alpha;
        for (std::size_t i = 0; i < group.alphas.size(); ++i) {
            if (i) alpha += ';';
            alpha += json(group.alphas[i]).dump();
        }
        const auto& a = group.aggregates;
        csv += alpha + "," + std::string(method_name(group.method)) + "," +
               std::to_string(group.budget) + "," + std::to_string(a.trials) + "," +
               std::to_string(a.failed) + "," + std::to_string(a.nulls) + "," +
               json(a.null_rate).dump() + "," + json(a.violation_rate).dump() + "," +
               json(a.free_mean).dump() + "," + json(a.free_ci95).dump();
        for (int i = 0; i < num_objectives; ++i) {
            const bool have = i < static_cast<int>(a.test_mean.size());
            csv += ",";
            csv += have ? json(a.test_mean[i]).dump() : "";
            csv += ",";
            csv += have ? json(a.test_ci95[i]).dump() : "";
        }
        csv += "\n";
    }
    return csv;
}

void emit_results(const RunReport& report, int num_objectives,
                  const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto write_file = [&](const std::string& name, const std::string& body) {
        std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + name + " in " + out_dir);
        out << body;
    };
    write_file("results.json", report_to_json(report));
    write_file("results.csv", report_to_csv(report, num_objectives));
    for (std::size_t g = 0; g < report.groups.size(); ++g) {
        const auto& group = report.groups[g];
        if (!group.iterations.empty()) {
            write_file("iterations_group" + std::to_string(g) + ".jsonl",
                       bo::iteration_log_jsonl(group.iterations));
        }
        if (!group.selection_report.empty()) {
            write_file("selection_group" + std::to_string(g) + ".json",
                       group.selection_report);
        }
    }
}

BinomialCi clopper_pearson(int successes, int trials, double level) {
    BinomialCi ci;
    if (trials <= 0) return ci;
    const double tail = 0.5 * (1.0 - level);
    const auto bisect = [&](auto f, double target, bool increasing) {
        double lo = 0.0;
        double hi = 1.0;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            const bool above = f(mid) > target;
            if (above == increasing) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return 0.5 * (lo + hi);
    };
    if (successes <= 0) {
        ci.low = 0.0;
    } else {
        // P(X >= v | p) grows with p; find p with upper-tail mass = tail
        ci.low = bisect(
            [&](double p) {
                return 1.0 - stats::binom_cdf(successes - 1, trials, p);
            },
            tail, true);
    }
    if (successes >= trials) {
        ci.high = 1.0;
    } else {
        // P(X <= v | p) falls with p; find p with lower-tail mass = tail
        ci.high = bisect(
            [&](double p) { return stats::binom_cdf(successes, trials, p); }, tail,
            false);
    }
    return ci;
}

}  // namespace riskbo::experiment
