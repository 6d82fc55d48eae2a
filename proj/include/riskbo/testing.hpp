#pragma once

#include "riskbo/core.hpp"
#include "riskbo/guided_bo.hpp"
#include "riskbo/objectives.hpp"
#include "riskbo/stats.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace riskbo::testing {

struct TestRecord {
    ConfigId config_id = 0;
    double val_p = 1.0;               // approximated from validation data
    std::optional<double> cal_p;      // from calibration data, once tested
    bool rejected = false;
};

/// Certified outcome: the chosen configuration (or null), the validated
/// prefix, and the full candidate ordering.
struct SelectionResult {
    std::optional<Configuration> chosen;
    std::vector<ConfigId> valid_set;
    std::vector<ConfigId> ordering;
    bool degenerate = false;
};

/// Everything needed to audit one selection run.
struct SelectionReport {
    SelectionResult result;
    stats::RegionOfInterest region;
    std::vector<EvalRecord> records;          // all evaluated candidates
    std::vector<std::size_t> candidate_index; // Pareto-surviving records
    std::vector<TestRecord> tests;            // aligned with result.ordering
    std::size_t reject_boundary = 0;          // first FST failure position J
    std::vector<bo::IterationLogEntry> iterations;
};

/// Indices of records whose validation-mean vectors are non-dominated
/// within the set. Input order is preserved.
std::vector<std::size_t> filter_pareto_candidates(std::span<const EvalRecord> records);

/// Validation-side p-values with sample size k, same bound family as the
/// calibration stage.
std::vector<TestRecord> approximate_p_values(std::span<const EvalRecord> candidates,
                                             const RiskSpec& spec, long k);

/// Ascending val_p; ties by validation free mean, then id. Returns a
/// permutation of candidate positions.
std::vector<std::size_t> order_candidates(std::span<const TestRecord> tests,
                                          std::span<const EvalRecord> candidates);

/// Prefix length J of the fixed-sequence test: reject while cal_p < delta,
/// stop at the first failure.
std::size_t fixed_sequence_test(std::span<const double> cal_p, double delta);

/// Shared second stage for every candidate-generation method: Pareto
/// filter, validation ordering, lazy calibration evaluation with FST, and
/// the final free-objective argmin over the validated prefix. Calibration
/// evaluation stops at the first FST failure; later candidates are never
/// queried.
SelectionReport certify(std::vector<EvalRecord> records,
                        const objectives::ObjectiveProvider& objective,
                        const RiskSpec& spec, const stats::RegionOfInterest& region,
                        std::size_t k, std::size_t m, std::uint64_t cal_seed);

struct DataSizes {
    std::size_t k = 0;  // validation samples
    std::size_t m = 0;  // calibration samples
};

/// Full pipeline: region of interest, guided optimization on validation
/// data, then certification on calibration data. Throws when the
/// optimization stage aborts.
SelectionReport select(const objectives::ObjectiveProvider& objective,
                       const SearchSpace& space, const RiskSpec& spec,
                       const DataSizes& sizes, const bo::BOConfig& bo_config,
                       std::uint64_t val_seed, std::uint64_t cal_seed);

struct AlphaInterval {
    double low = 0.0;
    double high = 0.0;
};

/// Observed per-constraint validation-mean ranges over a pool; feasible
/// alpha choices live inside these intervals.
std::vector<AlphaInterval> suggest_alpha_range(std::span<const EvalRecord> pool_records,
                                               int num_constrained);

std::string selection_report_json(const SelectionReport& report);

}  // namespace riskbo::testing
