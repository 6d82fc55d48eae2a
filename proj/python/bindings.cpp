#include "riskbo/experiment.hpp"
#include "riskbo/guided_bo.hpp"
#include "riskbo/objectives.hpp"
#include "riskbo/pareto.hpp"
#include "riskbo/random.hpp"
#include "riskbo/stats.hpp"
#include "riskbo/surrogate.hpp"
#include "riskbo/testing.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace riskbo;

namespace {

RiskSpec make_risk_spec(const std::vector<double>& alphas, double delta,
                        double delta_prime, const std::string& bound) {
    RiskSpec spec;
    spec.alphas = alphas;
    spec.delta = delta;
    spec.delta_prime = delta_prime;
    spec.bound = bound_from_name(bound);
    spec.validate();
    return spec;
}

std::vector<pareto::ObjectivePoint> to_points(
    const std::vector<std::vector<double>>& values) {
    std::vector<pareto::ObjectivePoint> points;
    points.reserve(values.size());
    for (const auto& v : values) points.emplace_back(v);
    return points;
}

}  // namespace

PYBIND11_MODULE(_riskbo, m) {
    m.doc() = "risk-controlled configuration selection: testing-guided "
              "multi-objective Bayesian optimization with certified selection";

    // concentration bounds
    m.def("hoeffding_p_value", &stats::hoeffding_p_value, py::arg("lhat"),
          py::arg("m"), py::arg("alpha"));
    m.def("hb_p_value", &stats::hb_p_value, py::arg("lhat"), py::arg("m"),
          py::arg("alpha"));
    m.def("binom_cdf", &stats::binom_cdf, py::arg("j"), py::arg("n"), py::arg("p"));
    m.def("h1", &stats::h1, py::arg("a"), py::arg("b"));
    m.def(
        "alpha_max",
        [](double alpha, double delta, long m, const std::string& bound) {
            const auto am = stats::alpha_max(alpha, delta, m, bound_from_name(bound));
            return py::make_tuple(am.value, am.degenerate);
        },
        py::arg("alpha"), py::arg("delta"), py::arg("m"),
        py::arg("bound") = "hoeffding_bentkus",
        "Largest certifiable empirical loss; returns (value, degenerate).");
    m.def(
        "region_of_interest",
        [](const std::vector<double>& alphas, double delta, double delta_prime,
           long k, long m, const std::string& bound) {
            const auto region = stats::region_of_interest(
                make_risk_spec(alphas, delta, delta_prime, bound), k, m);
            py::dict out;
            out["alpha_max"] = region.alpha_max;
            out["low"] = region.low;
            out["high"] = region.high;
            out["degenerate"] = region.degenerate;
            return out;
        },
        py::arg("alphas"), py::arg("delta") = 0.1, py::arg("delta_prime") = 1e-4,
        py::arg("k") = 1000, py::arg("m") = 1000,
        py::arg("bound") = "hoeffding_bentkus");

    // pareto front and hypervolume
    m.def(
        "pareto_front",
        [](const std::vector<std::vector<double>>& points) {
            std::vector<std::vector<double>> out;
            const auto front = pareto::pareto_front(to_points(points));
            for (const auto& p : front.points()) out.push_back(p.values);
            return out;
        },
        py::arg("points"));
    m.def(
        "hypervolume",
        [](const std::vector<std::vector<double>>& points,
           const std::vector<double>& reference) {
            return pareto::hypervolume(to_points(points), reference);
        },
        py::arg("points"), py::arg("reference"));
    m.def(
        "hvi",
        [](const std::vector<double>& candidate,
           const std::vector<std::vector<double>>& front,
           const std::vector<double>& reference) {
            const auto archive = pareto::pareto_front(to_points(front));
            return pareto::hvi(pareto::ObjectivePoint(candidate), archive, reference);
        },
        py::arg("candidate"), py::arg("front"), py::arg("reference"));
    m.def(
        "hypervolume_mc",
        [](const std::vector<std::vector<double>>& points,
           const std::vector<double>& reference, std::size_t n_samples,
           std::uint64_t seed) {
            const auto est =
                pareto::hypervolume_mc(to_points(points), reference, n_samples, seed);
            return py::make_tuple(est.value, est.std_error);
        },
        py::arg("points"), py::arg("reference"), py::arg("n_samples") = 100000,
        py::arg("seed") = 0);

    // gaussian-process surrogate
    py::class_<surrogate::GpModel>(m, "GpModel")
        .def(
            "posterior",
            [](const surrogate::GpModel& model, const Eigen::VectorXd& query) {
                const auto post = model.posterior(query);
                return py::make_tuple(post.mean, post.variance);
            },
            py::arg("query"))
        .def_property_readonly("log_marginal_likelihood",
                               &surrogate::GpModel::log_marginal_likelihood);
    m.def(
        "fit_gp",
        [](const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
           std::uint64_t seed) {
            surrogate::FitConfig config;
            config.seed = seed;
            return surrogate::fit_gp(inputs, targets, config);
        },
        py::arg("inputs"), py::arg("targets"), py::arg("seed") = 0);

    // end-to-end selection on the builtin synthetic problems
    m.def("builtin_problems", []() {
        py::list out;
        for (const auto& p : objectives::builtin_problems()) {
            py::dict entry;
            entry["name"] = p.name;
            entry["dim"] = p.dim;
            entry["constrained"] = p.constrained;
            entry["summary"] = p.summary;
            out.append(entry);
        }
        return out;
    });
    m.def(
        "select",
        [](const std::string& problem, const std::vector<double>& alphas,
           double delta, double delta_prime, const std::string& bound, int budget,
           int init, std::size_t k, std::size_t m, std::uint64_t seed) {
            const auto provider = objectives::make_builtin_problem(problem);
            const auto spec = make_risk_spec(alphas, delta, delta_prime, bound);
            bo::BOConfig config;
            config.budget = budget;
            config.init_size = init;
            config.seed = derive_seed(seed, "bo");
            const auto report = testing::select(
                *provider, provider->space(), spec, {k, m}, config,
                derive_seed(seed, "val"), derive_seed(seed, "cal"));
            return testing::selection_report_json(report);
        },
        py::arg("problem"), py::arg("alphas"), py::arg("delta") = 0.1,
        py::arg("delta_prime") = 1e-4, py::arg("bound") = "hoeffding_bentkus",
        py::arg("budget") = 10, py::arg("init") = 5, py::arg("k") = 1000,
        py::arg("m") = 1000, py::arg("seed") = 0,
        "Full guided selection on a builtin problem; returns the selection "
        "report as a JSON string.");
    m.def(
        "run_experiment",
        [](const std::string& config_json) {
            const auto config = experiment::config_from_json_string(config_json);
            const auto report = experiment::run_experiment(config);
            return experiment::report_to_json(report);
        },
        py::arg("config_json"),
        "Runs an experiment from a JSON config document (the same schema the "
        "CLI accepts) and returns results as a JSON string.");
}
