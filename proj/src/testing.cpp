#include "riskbo/testing.hpp"

#include "riskbo/pareto.hpp"
#include "riskbo/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace riskbo::testing {

using nlohmann::json;

std::vector<std::size_t> filter_pareto_candidates(
    std::span<const EvalRecord> records) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < records.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < records.size() && !dominated; ++j) {
            if (j == i) continue;
            dominated = pareto::dominates(
                std::span<const double>(records[j].val_means),
                std::span<const double>(records[i].val_means));
        }
        if (!dominated) kept.push_back(i);
    }
    return kept;
}

std::vector<TestRecord> approximate_p_values(std::span<const EvalRecord> candidates,
                                             const RiskSpec& spec, long k) {
    std::vector<TestRecord> tests;
    tests.reserve(candidates.size());
    for (const auto& rec : candidates) {
        TestRecord t;
        t.config_id = rec.config.id;
        t.val_p = stats::p_value_for_record(
            std::span<const double>(rec.val_means).first(spec.num_constrained()),
            spec, k, spec.bound);
        tests.push_back(t);
    }
    return tests;
}

std::vector<std::size_t> order_candidates(std::span<const TestRecord> tests,
                                          std::span<const EvalRecord> candidates) {
    if (tests.size() != candidates.size()) {
        throw std::invalid_argument("tests and candidates must align");
    }
    const std::size_t free_index =
        candidates.empty() ? 0 : candidates.front().val_means.size() - 1;
    std::vector<std::size_t> order(tests.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (tests[a].val_p != tests[b].val_p) return tests[a].val_p < tests[b].val_p;
        const double fa = candidates[a].val_means[free_index];
        const double fb = candidates[b].val_means[free_index];
        if (fa != fb) return fa < fb;
        return tests[a].config_id < tests[b].config_id;
    });
    return order;
}

std::size_t fixed_sequence_test(std::span<const double> cal_p, double delta) {
    std::size_t j = 0;
    while (j < cal_p.size() && cal_p[j] < delta) ++j;
    return j;
}

SelectionReport certify(std::vector<EvalRecord> records,
                        const objectives::ObjectiveProvider& objective,
                        const RiskSpec& spec, const stats::RegionOfInterest& region,
                        std::size_t k, std::size_t m, std::uint64_t cal_seed) {
    spec.validate();
    SelectionReport report;
    report.region = region;
    report.result.degenerate = region.degenerate;

    report.candidate_index = filter_pareto_candidates(records);
    std::vector<EvalRecord> candidates;
    for (auto idx : report.candidate_index) candidates.push_back(records[idx]);

    auto tests = approximate_p_values(candidates, spec, static_cast<long>(k));
    const auto order = order_candidates(tests, candidates);

    // lazy calibration pass in FST order; stop at the first failure
    const std::size_t free_index = spec.free_objective_index();
    std::vector<TestRecord> ordered_tests;
    std::vector<double> cal_p_seen;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const std::size_t cand = order[pos];
        TestRecord t = tests[cand];
        report.result.ordering.push_back(t.config_id);

        if (cal_p_seen.size() == pos) {  // FST still rejecting
            const LossSamples samples = objective.evaluate(
                candidates[cand].config, Split::calibration, m, cal_seed);
            const auto cal_means = samples.means();
            const double p = stats::p_value_for_record(
                std::span<const double>(cal_means).first(spec.num_constrained()),
                spec, static_cast<long>(m), spec.bound);
            t.cal_p = p;
            t.rejected = p < spec.delta;
            candidates[cand].cal_means = cal_means;
            records[report.candidate_index[cand]].cal_means = cal_means;
            if (t.rejected) cal_p_seen.push_back(p);
        }
        ordered_tests.push_back(t);
    }
    report.reject_boundary = cal_p_seen.size();
    report.tests = std::move(ordered_tests);

    // validated prefix and the free-objective argmin over it
    double best_free = std::numeric_limits<double>::infinity();
    for (std::size_t pos = 0; pos < report.reject_boundary; ++pos) {
        const std::size_t cand = order[pos];
        report.result.valid_set.push_back(tests[cand].config_id);
        const double free_value = candidates[cand].val_means[free_index];
        if (free_value < best_free ||
            (free_value == best_free && report.result.chosen &&
             candidates[cand].config.id < report.result.chosen->id)) {
            best_free = free_value;
            report.result.chosen = candidates[cand].config;
        }
    }

    report.records = std::move(records);
    return report;
}

SelectionReport select(const objectives::ObjectiveProvider& objective,
                       const SearchSpace& space, const RiskSpec& spec,
                       const DataSizes& sizes, const bo::BOConfig& bo_config,
                       std::uint64_t val_seed, std::uint64_t cal_seed) {
    if (sizes.k < 2 || sizes.m < 2) {
        throw std::invalid_argument("need k, m >= 2");
    }
    const auto region = stats::region_of_interest(
        spec, static_cast<long>(sizes.k), static_cast<long>(sizes.m));

    bo::BoResult stage1 = bo::run_bo(objective, space, spec, region, bo_config,
                                     sizes.k, val_seed);
    if (!stage1.completed) {
        throw std::runtime_error("optimization aborted: " + stage1.error);
    }

    SelectionReport report = certify(std::move(stage1.records), objective, spec,
                                     region, sizes.k, sizes.m, cal_seed);
    report.iterations = std::move(stage1.log);
    return report;
}

std::vector<AlphaInterval> suggest_alpha_range(std::span<const EvalRecord> pool_records,
                                               int num_constrained) {
    if (pool_records.empty()) throw std::invalid_argument("empty pool");
    std::vector<AlphaInterval> intervals(num_constrained);
    for (int i = 0; i < num_constrained; ++i) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& rec : pool_records) {
            lo = std::min(lo, rec.val_means.at(i));
            hi = std::max(hi, rec.val_means.at(i));
        }
        intervals[i] = {lo, hi};
    }
    return intervals;
}

std::string selection_report_json(const SelectionReport& report) {
    json doc;
    doc["region"] = {{"alpha_max", report.region.alpha_max},
                     {"low", report.region.low},
                     {"high", report.region.high},
                     {"bound", std::string(bound_name(report.region.bound))},
                     {"k", report.region.k},
                     {"m", report.region.m},
                     {"degenerate", report.region.degenerate}};

    json ordering = json::array();
    for (const auto& t : report.tests) {
        json entry;
        entry["id"] = t.config_id;
        entry["val_p"] = t.val_p;
        if (t.cal_p) {
            entry["cal_p"] = *t.cal_p;
        } else {
            entry["cal_p"] = nullptr;
        }
        entry["rejected"] = t.rejected;
        ordering.push_back(entry);
    }
    doc["ordering"] = ordering;
    doc["reject_boundary"] = report.reject_boundary;

    if (report.result.chosen) {
        const auto& chosen = *report.result.chosen;
        doc["chosen"] = {
            {"id", chosen.id},
            {"lambda", std::vector<double>(chosen.values.data(),
                                           chosen.values.data() + chosen.values.size())}};
    } else {
        doc["chosen"] = nullptr;
    }
    doc["valid_set"] = report.result.valid_set;
    doc["degenerate"] = report.result.degenerate;

    json candidates = json::array();
    for (const auto& rec : report.records) {
        json entry;
        entry["id"] = rec.config.id;
        entry["lambda"] = std::vector<double>(
            rec.config.values.data(),
            rec.config.values.data() + rec.config.values.size());
        entry["val_means"] = rec.val_means;
        if (rec.cal_means) {
            entry["cal_means"] = *rec.cal_means;
        } else {
            entry["cal_means"] = nullptr;
        }
        candidates.push_back(entry);
    }
    doc["candidates"] = candidates;
    return doc.dump(2);
}

}  // namespace riskbo::testing
