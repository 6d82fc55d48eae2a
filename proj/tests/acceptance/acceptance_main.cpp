// Acceptance suite: runs every top-level correctness and efficiency
// criterion at its stated tolerance and prints one PASS/FAIL line per
// criterion. Exit code is the number of failures.

#include "riskbo/experiment.hpp"
#include "riskbo/guided_bo.hpp"
#include "riskbo/objectives.hpp"
#include "riskbo/pareto.hpp"
#include "riskbo/random.hpp"
#include "riskbo/stats.hpp"
#include "riskbo/surrogate.hpp"
#include "riskbo/testing.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace riskbo;

namespace {

int failures = 0;

void report(int index, const std::string& name, bool pass,
            const std::string& detail) {
    std::printf("%s  %2d. %s (%s)\n", pass ? "PASS" : "FAIL", index, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
}

std::string fmt(double value) {
    std::ostringstream os;
    os << value;
    return os.str();
}

// ---------------------------------------------------------------- 1
void criterion_alpha_max_worked_example() {
    volatile double warmup =
        stats::alpha_max(0.05, 0.1, 5000, BoundKind::hoeffding).value;
    (void)warmup;
    const auto start = std::chrono::steady_clock::now();
    const auto am = stats::alpha_max(0.05, 0.1, 5000, BoundKind::hoeffding);
    const double elapsed = seconds_since(start);
    const bool value_ok = std::abs(am.value - 0.034826) <= 1e-4;
    const bool time_ok = elapsed < 1e-3;
    report(1, "alpha_max(0.05, delta=0.1, m=5000, hoeffding) = 0.034826 +- 1e-4",
           value_ok && time_ok,
           "value=" + fmt(am.value) + " runtime=" + fmt(elapsed * 1e3) + "ms");
}

// ---------------------------------------------------------------- 2
void criterion_fwer() {
    const auto start = std::chrono::steady_clock::now();
    bool pass = true;
    std::string detail;
    for (double delta : {0.1, 0.05}) {
        experiment::ExperimentConfig config;
        config.provider.preset = "fairness-like";
        config.risk.alphas = {0.5};  // half the space violates mu_1 <= 0.5
        config.risk.delta = delta;
        config.bo.budget = 10;
        config.bo.init_size = 5;
        config.trials = 500;
        config.k = 2000;
        config.m = 2000;
        config.seed = 20240 + static_cast<std::uint64_t>(delta * 100);
        config.jobs = 2;
        const auto summary = experiment::run_fwer_study(config);
        const double bound =
            delta + 3.0 * std::sqrt(delta * (1.0 - delta) / config.trials);
        pass &= summary.rate <= bound;
        detail += "delta=" + fmt(delta) + ": rate=" + fmt(summary.rate) +
                  " bound=" + fmt(bound) + " nulls=" + fmt(summary.nulls) + "; ";
    }
    detail += "runtime=" + fmt(seconds_since(start)) + "s";
    pass &= seconds_since(start) < 600.0;
    report(2, "FWER on fairness-like stays within the Monte Carlo band", pass, detail);
}

// ---------------------------------------------------------------- 3
void criterion_super_uniformity() {
    const int trials = 100000;
    const double alpha = 0.1;
    const std::vector<double> levels = {0.01, 0.05, 0.1, 0.2};
    bool pass = true;
    std::string detail;
    for (long m : {100L, 5000L}) {
        std::mt19937_64 gen(4242 + m);
        std::binomial_distribution<long> binom(m, alpha);
        std::vector<int> hf_hits(levels.size(), 0);
        std::vector<int> hb_hits(levels.size(), 0);
        for (int t = 0; t < trials; ++t) {
            const double lhat =
                static_cast<double>(binom(gen)) / static_cast<double>(m);
            const double hf = stats::hoeffding_p_value(lhat, m, alpha);
            const double hb = stats::hb_p_value(lhat, m, alpha);
            for (std::size_t u = 0; u < levels.size(); ++u) {
                if (hf <= levels[u]) ++hf_hits[u];
                if (hb <= levels[u]) ++hb_hits[u];
            }
        }
        for (std::size_t u = 0; u < levels.size(); ++u) {
            const double slack =
                3.0 * std::sqrt(levels[u] * (1.0 - levels[u]) / trials);
            const double hf_rate = static_cast<double>(hf_hits[u]) / trials;
            const double hb_rate = static_cast<double>(hb_hits[u]) / trials;
            pass &= hf_rate <= levels[u] + slack;
            pass &= hb_rate <= levels[u] + slack;
            if (hb_rate > levels[u] + slack || hf_rate > levels[u] + slack) {
                detail += "m=" + fmt(m) + " u=" + fmt(levels[u]) + " exceeded; ";
            }
        }
    }
    if (detail.empty()) detail = "both bounds, m in {100, 5000}, T=1e5";
    report(3, "p-values remain super-uniform at the null boundary", pass, detail);
}

// ---------------------------------------------------------------- 4
void criterion_hb_tightness() {
    Rng rng(777);
    int violations = 0;
    for (int i = 0; i < 10000; ++i) {
        const double lhat = rng.uniform01();
        const double alpha = 0.02 + 0.96 * rng.uniform01();
        const long m = 1 + static_cast<long>(rng.uniform_below(10000));
        if (stats::hb_p_value(lhat, m, alpha) >
            stats::hoeffding_p_value(lhat, m, alpha) + 1e-12) {
            ++violations;
        }
    }
    int grid_violations = 0;
    int grid_points = 0;
    for (double alpha : {0.05, 0.1, 0.2, 0.4, 0.7}) {
        for (double delta : {0.01, 0.05, 0.1, 0.2}) {
            for (long m : {50L, 200L, 1000L, 5000L, 20000L}) {
                ++grid_points;
                const auto hf = stats::alpha_max(alpha, delta, m, BoundKind::hoeffding);
                const auto hb =
                    stats::alpha_max(alpha, delta, m, BoundKind::hoeffding_bentkus);
                if (hb.value < hf.value - 1e-9) ++grid_violations;
            }
        }
    }
    report(4, "HB p-value dominates Hoeffding; HB alpha_max is never smaller",
           violations == 0 && grid_violations == 0,
           "sweep violations=" + fmt(violations) + "/10000, grid violations=" +
               fmt(grid_violations) + "/" + fmt(grid_points));
}

// ---------------------------------------------------------------- 5
double hv_inclusion_exclusion(const std::vector<pareto::ObjectivePoint>& points,
                              const std::vector<double>& reference) {
    std::vector<std::vector<double>> kept;
    for (const auto& p : points) {
        bool inside = true;
        for (std::size_t j = 0; j < reference.size(); ++j) {
            inside &= p.values[j] < reference[j];
        }
        if (inside) kept.push_back(p.values);
    }
    double total = 0.0;
    for (std::size_t mask = 1; mask < (1u << kept.size()); ++mask) {
        double volume = 1.0;
        for (std::size_t j = 0; j < reference.size(); ++j) {
            double corner = -1e300;
            for (std::size_t i = 0; i < kept.size(); ++i) {
                if (mask & (1u << i)) corner = std::max(corner, kept[i][j]);
            }
            volume *= reference[j] - corner;
        }
        total += (__builtin_popcount(static_cast<unsigned>(mask)) % 2 == 1) ? volume
                                                                            : -volume;
    }
    return total;
}

void criterion_hypervolume() {
    Rng rng(31337);
    int exact_failures = 0;
    for (int c = 0; c < 1000; ++c) {
        const int dim = (c % 2 == 0) ? 2 : 3;
        const int count = 1 + static_cast<int>(rng.uniform_below(6));
        std::vector<pareto::ObjectivePoint> points;
        for (int i = 0; i < count; ++i) {
            std::vector<double> v(dim);
            for (auto& x : v) x = rng.uniform01();
            points.emplace_back(std::move(v));
        }
        const std::vector<double> reference(dim, 1.0);
        const double exact = pareto::hypervolume(points, reference);
        const double oracle = hv_inclusion_exclusion(points, reference);
        if (std::abs(exact - oracle) > 1e-10) ++exact_failures;
    }

    int mc_failures = 0;
    for (int c = 0; c < 50; ++c) {
        const int dim = (c % 2 == 0) ? 2 : 3;
        const int count = 2 + static_cast<int>(rng.uniform_below(5));
        std::vector<pareto::ObjectivePoint> points;
        for (int i = 0; i < count; ++i) {
            std::vector<double> v(dim);
            for (auto& x : v) x = rng.uniform01();
            points.emplace_back(std::move(v));
        }
        const std::vector<double> reference(dim, 1.0);
        const double exact = pareto::hypervolume(points, reference);
        const auto mc = pareto::hypervolume_mc(points, reference, 1000000,
                                               900 + static_cast<std::uint64_t>(c));
        if (std::abs(mc.value - exact) > 3.0 * mc.std_error + 1e-9) ++mc_failures;
    }
    report(5, "exact hypervolume matches inclusion-exclusion and Monte Carlo",
           exact_failures == 0 && mc_failures == 0,
           "exact failures=" + fmt(exact_failures) + "/1000, mc failures=" +
               fmt(mc_failures) + "/50");
}

// ---------------------------------------------------------------- 6
void criterion_gp() {
    Rng rng(2718);
    int posterior_failures = 0;
    for (int c = 0; c < 100; ++c) {
        const int n = 2 + static_cast<int>(rng.uniform_below(9));
        const int dim = 1 + static_cast<int>(rng.uniform_below(3));
        Eigen::MatrixXd inputs(n, dim);
        Eigen::VectorXd targets(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < dim; ++j) inputs(i, j) = rng.uniform01();
            targets[i] = rng.normal();
        }
        surrogate::KernelParams params;
        params.length_scales = Eigen::VectorXd::Constant(dim, 0.2 + 0.6 * rng.uniform01());
        params.amplitude = 0.5 + 2.0 * rng.uniform01();
        params.noise_var = 1e-4 + 0.05 * rng.uniform01();
        const surrogate::GpModel model(inputs, targets, params);

        const double mean_t = targets.mean();
        const double std_t = std::max(
            std::sqrt((targets.array() - mean_t).square().sum() / n), 1e-12);
        const Eigen::VectorXd y = (targets.array() - mean_t) / std_t;
        Eigen::MatrixXd K(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                K(i, j) = surrogate::kernel_eval(inputs.row(i).transpose(),
                                                 inputs.row(j).transpose(), params);
            }
        }
        K.diagonal().array() += params.noise_var;
        const Eigen::MatrixXd inv = K.fullPivLu().inverse();
        for (int q = 0; q < 5; ++q) {
            Eigen::VectorXd query(dim);
            for (int j = 0; j < dim; ++j) query[j] = rng.uniform01();
            Eigen::VectorXd kstar(n);
            for (int i = 0; i < n; ++i) {
                kstar[i] = surrogate::kernel_eval(query, inputs.row(i).transpose(),
                                                  params);
            }
            const double mean_oracle = mean_t + std_t * kstar.dot(inv * y);
            const double var_oracle =
                std_t * std_t *
                std::max(params.amplitude - kstar.dot(inv * kstar), 0.0);
            const auto post = model.posterior(query);
            if (std::abs(post.mean - mean_oracle) > 1e-8 ||
                std::abs(post.variance - var_oracle) > 1e-8) {
                ++posterior_failures;
            }
        }
    }

    int interpolation_failures = 0;
    {
        Eigen::MatrixXd inputs(8, 1);
        Eigen::VectorXd targets(8);
        for (int i = 0; i < 8; ++i) {
            inputs(i, 0) = (i + 0.5) / 8.0;
            targets[i] = std::sin(5.0 * inputs(i, 0));
        }
        surrogate::KernelParams params;
        params.length_scales = Eigen::VectorXd::Constant(1, 0.3);
        params.amplitude = 1.0;
        params.noise_var = 1e-9;
        const surrogate::GpModel model(inputs, targets, params);
        for (int i = 0; i < 8; ++i) {
            const auto post = model.posterior(inputs.row(i).transpose());
            if (std::abs(post.mean - targets[i]) > 1e-6) ++interpolation_failures;
        }
    }

    int negative_variances = 0;
    {
        Eigen::MatrixXd inputs(15, 2);
        Eigen::VectorXd targets(15);
        for (int i = 0; i < 15; ++i) {
            inputs(i, 0) = rng.uniform01();
            inputs(i, 1) = rng.uniform01();
            targets[i] = rng.normal();
        }
        surrogate::FitConfig fit;
        fit.seed = 5;
        const auto model = surrogate::fit_gp(inputs, targets, fit);
        for (int q = 0; q < 10000; ++q) {
            Eigen::VectorXd query(2);
            query << rng.uniform01(), rng.uniform01();
            if (model.posterior(query).variance < 0.0) ++negative_variances;
        }
    }
    report(6, "GP posterior matches a dense solve, interpolates, and stays PSD",
           posterior_failures == 0 && interpolation_failures == 0 &&
               negative_variances == 0,
           "dense mismatches=" + fmt(posterior_failures) + ", interpolation misses=" +
               fmt(interpolation_failures) + ", negative variances=" +
               fmt(negative_variances) + "/10000");
}

// ---------------------------------------------------------------- 7
void criterion_guided_vs_random() {
    const auto start = std::chrono::steady_clock::now();
    experiment::ExperimentConfig config;
    config.provider.preset = "pruning-like";
    config.risk.alphas = {0.35};
    config.bo.budget = 20;
    config.bo.init_size = 10;
    config.methods = {experiment::Method::guided, experiment::Method::random_lhs};
    config.trials = 30;
    config.k = 2000;
    config.m = 2000;
    config.n_test = 2000;
    config.seed = 7117;
    config.jobs = 2;
    config.resample_validation = true;  // each trial is an independent replicate
    const auto report_run = experiment::run_experiment(config);

    const auto& guided = report_run.groups[0].rows;
    const auto& random = report_run.groups[1].rows;
    const auto region = stats::region_of_interest(config.risk, 2000, 2000);

    double guided_sum = 0.0;
    int guided_n = 0;
    int guided_in_region = 0;
    for (const auto& row : guided) {
        if (row.failed || row.null_selection || row.test_means.empty()) continue;
        guided_sum += row.test_means.back();
        ++guided_n;
        if (row.test_means[0] >= region.low[0] && row.test_means[0] <= region.high[0]) {
            ++guided_in_region;
        }
    }
    double random_sum = 0.0;
    int random_n = 0;
    for (const auto& row : random) {
        if (row.failed || row.null_selection || row.test_means.empty()) continue;
        random_sum += row.test_means.back();
        ++random_n;
    }
    const double guided_mean = guided_n ? guided_sum / guided_n : 1.0;
    const double random_mean = random_n ? random_sum / random_n : 1.0;
    const double in_region_frac =
        guided_n ? static_cast<double>(guided_in_region) / guided_n : 0.0;
    const double elapsed = seconds_since(start);

    const bool pass = guided_mean <= random_mean && in_region_frac >= 0.6 &&
                      guided_n > 0 && elapsed < 900.0;
    report(7, "guided selection beats random LHS and lands in the region",
           pass,
           "guided free=" + fmt(guided_mean) + " (n=" + fmt(guided_n) +
               "), random free=" + fmt(random_mean) + " (n=" + fmt(random_n) +
               "), in-region=" + fmt(in_region_frac) + ", runtime=" + fmt(elapsed) +
               "s");
}

// ---------------------------------------------------------------- 8
void criterion_budget_sweep() {
    experiment::ExperimentConfig config;
    config.provider.preset = "pruning-like";
    config.risk.alphas = {0.35};
    config.bo.budget = 50;
    config.bo.init_size = 25;
    config.methods = {experiment::Method::guided};
    config.trials = 30;
    config.k = 2000;
    config.m = 2000;
    config.n_test = 2000;
    config.seed = 9119;
    config.jobs = 2;
    config.resample_validation = true;
    const auto sweep = experiment::run_budget_sweep(config, {10, 50});

    const auto& small = sweep.groups[0].rows;
    const auto& large = sweep.groups[1].rows;
    int wins = 0;
    int comparable = 0;
    double small_sum = 0.0, large_sum = 0.0;
    int small_n = 0, large_n = 0;
    for (int t = 0; t < config.trials; ++t) {
        const auto& a = small[t];
        const auto& b = large[t];
        if (!a.failed && !a.null_selection && !a.test_means.empty()) {
            small_sum += a.test_means.back();
            ++small_n;
        }
        if (!b.failed && !b.null_selection && !b.test_means.empty()) {
            large_sum += b.test_means.back();
            ++large_n;
        }
        if (a.failed || b.failed || a.null_selection || b.null_selection) continue;
        if (a.test_means.empty() || b.test_means.empty()) continue;
        const double fa = a.test_means.back();
        const double fb = b.test_means.back();
        if (fa == fb) continue;
        ++comparable;
        if (fb < fa) ++wins;
    }
    // one-sided sign test: P(Binom(n, 1/2) >= wins)
    const double p_value =
        comparable == 0
            ? 1.0
            : 1.0 - stats::binom_cdf(wins - 1, comparable, 0.5);
    const double small_mean = small_n ? small_sum / small_n : 1.0;
    const double large_mean = large_n ? large_sum / large_n : 1.0;
    const bool pass = large_mean <= small_mean && p_value < 0.05;
    report(8, "budget 50 improves the free objective over budget 10", pass,
           "mean(N=10)=" + fmt(small_mean) + ", mean(N=50)=" + fmt(large_mean) +
               ", wins=" + fmt(wins) + "/" + fmt(comparable) +
               ", sign-test p=" + fmt(p_value));
}

// ---------------------------------------------------------------- 9
void criterion_baseline_equivalence() {
    experiment::ExperimentConfig config;
    config.provider.preset = "fairness-like";
    config.risk.alphas = {0.5};
    config.bo.budget = 12;
    config.bo.init_size = 6;
    config.trials = 1;
    config.k = 500;
    config.m = 500;
    config.seed = 4321;
    config.methods = {experiment::Method::plain_hvi};
    const auto run = experiment::run_experiment(config);
    const std::string via_method = bo::iteration_log_jsonl(run.groups[0].iterations);

    // the guided loop handed the degenerate whole-space region directly
    const auto provider = experiment::make_provider(config.provider);
    const auto region = stats::whole_space_region(config.risk, 500, 500);
    bo::BOConfig bo_config = config.bo;
    bo_config.seed = derive_seed(config.seed, "stage1", 0);
    const auto direct = bo::run_bo(*provider, provider->space(), config.risk, region,
                                   bo_config, 500, derive_seed(config.seed, "val"));
    const std::string via_guided_loop = bo::iteration_log_jsonl(direct.log);

    report(9, "plain_hvi equals the guided loop under a whole-space region",
           !via_method.empty() && via_method == via_guided_loop,
           via_method == via_guided_loop ? "iteration logs byte-identical"
                                         : "logs differ");
}

// ---------------------------------------------------------------- 10
void criterion_cli_determinism(const std::string& cli_path) {
    namespace fs = std::filesystem;
    if (cli_path.empty()) {
        report(10, "CLI determinism", false, "no CLI path supplied");
        return;
    }
    const fs::path base = fs::temp_directory_path() / "riskbo_acceptance_cli";
    fs::remove_all(base);
    fs::create_directories(base);
    bool ok = true;
    std::vector<std::string> payloads;
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path out = base / ("run" + std::to_string(rep));
        const std::string cmd = cli_path +
                                " run --problem fairness-like --alpha 0.5 --k 400"
                                " --m 400 --budget 8 --init 4 --trials 3 --seed 17"
                                " --jobs 2 --out " +
                                out.string() + " > " + (out.string() + ".log") +
                                " 2>&1";
        ok &= std::system(cmd.c_str()) == 0;
        std::ifstream in(out / "results.json", std::ios::binary);
        ok &= static_cast<bool>(in);
        payloads.emplace_back(std::istreambuf_iterator<char>(in),
                              std::istreambuf_iterator<char>());
    }
    ok &= !payloads[0].empty() && payloads[0] == payloads[1];
    report(10, "run --trials 3 --seed 17 twice writes byte-identical results.json",
           ok, ok ? fmt(payloads[0].size()) + " bytes" : "outputs differ");
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli_path = argc > 1 ? argv[1] : "";
    const auto start = std::chrono::steady_clock::now();

    criterion_alpha_max_worked_example();
    criterion_super_uniformity();
    criterion_hb_tightness();
    criterion_hypervolume();
    criterion_gp();
    criterion_baseline_equivalence();
    criterion_cli_determinism(cli_path);
    criterion_fwer();
    criterion_guided_vs_random();
    criterion_budget_sweep();

    std::printf("acceptance finished in %.1fs with %d failure(s)\n",
                seconds_since(start), failures);
    return failures;
}
