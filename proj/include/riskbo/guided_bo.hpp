#pragma once

#include "riskbo/core.hpp"
#include "riskbo/objectives.hpp"
#include "riskbo/pareto.hpp"
#include "riskbo/stats.hpp"
#include "riskbo/surrogate.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace riskbo::bo {

struct BOConfig {
    int budget = 10;      // total evaluations N
    int init_size = 5;    // initial pool N0
    std::uint64_t seed = 0;
    int candidate_pool_size = 4096;
    int perturbation_count = 256;
    double perturbation_sigma = 0.05;  // in unit-box coordinates

    void validate() const;
};

/// Everything the acquisition needs at one iteration: fitted models, the
/// evaluated-loss Pareto front, the target region, and the reference point
/// whose constrained coordinates always equal region.high.
struct AcquisitionState {
    pareto::ReferencePoint reference;
    pareto::ParetoArchive archive;
    std::vector<surrogate::GpModel> models;
    stats::RegionOfInterest region;
    std::optional<double> low_region_free_min;
    double reference_free_cap = 0.0;  // free value at initialization
};

/// Latin hypercube pool for n > 1 (uniform i.i.d. for n = 1), seeded, with
/// ids assigned sequentially from first_id.
std::vector<Configuration> sample_initial_pool(const SearchSpace& space, int n0,
                                               std::uint64_t seed,
                                               ConfigId first_id = 0);

/// (high_1, ..., high_c, max pool free validation mean)
pareto::ReferencePoint initial_reference(const stats::RegionOfInterest& region,
                                         std::span<const EvalRecord> pool_records);

/// Predicts over the candidates plus all evaluated inputs, finds the
/// low-risk region R_low (every constrained prediction below region.low),
/// and tightens the reference free coordinate to the smallest predicted
/// free value there. The coordinate never increases within a run.
void update_reference_free_coord(AcquisitionState& state,
                                 std::span<const Eigen::VectorXd> candidate_points);

struct Proposal {
    Eigen::VectorXd unit_point;
    std::vector<double> predicted;
    double acquisition = 0.0;
    bool fallback = false;  // every candidate had zero improvement
};

/// Scores predicted objective vectors by hypervolume improvement against
/// the reference point; ties break toward the smallest predicted free
/// value. Falls back to squared distance from the region box when no
/// candidate improves the hypervolume.
Proposal propose_next(const AcquisitionState& state,
                      std::span<const Eigen::VectorXd> candidate_points);

struct IterationLogEntry {
    int iteration = 0;
    std::vector<double> reference;
    std::vector<double> proposed;   // raw search-space coordinates
    std::vector<double> predicted;  // surrogate means at the proposal
    std::vector<double> realized;   // validation means after evaluation
};

std::string iteration_log_jsonl(std::span<const IterationLogEntry> entries);

struct BoResult {
    std::vector<EvalRecord> records;
    std::vector<IterationLogEntry> log;
    bool completed = false;
    std::string error;
};

/// Budget loop: initial pool, then budget - init_size rounds of
/// fit / update reference / filter front / propose / evaluate.
/// Finite provider spaces snap proposals to the nearest unevaluated
/// listed configuration. Deterministic given the seeds.
BoResult run_bo(const objectives::ObjectiveProvider& objective,
                const SearchSpace& space, const RiskSpec& spec,
                const stats::RegionOfInterest& region, const BOConfig& config,
                std::size_t k, std::uint64_t eval_seed);

/// Maps unit-box points into configurations, snapping to the provider's
/// finite list when one exists (skipping already-used entries).
std::vector<Configuration> project_candidates(
    const objectives::ObjectiveProvider& objective, const SearchSpace& space,
    std::span<const Eigen::VectorXd> unit_points, ConfigId first_id);

}  // namespace riskbo::bo
