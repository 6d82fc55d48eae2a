#include "riskbo/guided_bo.hpp"

#include "riskbo/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace riskbo::bo {

using nlohmann::json;

void BOConfig::validate() const {
    if (init_size < 2) throw std::invalid_argument("initial pool needs at least 2 points");
    if (budget < init_size) throw std::invalid_argument("budget must cover the initial pool");
    if (candidate_pool_size < 1 || perturbation_count < 0) {
        throw std::invalid_argument("candidate pool sizes must be positive");
    }
    if (!(perturbation_sigma > 0.0)) {
        throw std::invalid_argument("perturbation sigma must be positive");
    }
}

namespace {

// unit-box pool: stratified per dimension for n > 1, plain uniform for n = 1
std::vector<Eigen::VectorXd> lhs_unit(int dim, int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Eigen::VectorXd> points(count, Eigen::VectorXd(dim));
    if (dim == 1) {
        for (int i = 0; i < count; ++i) points[i][0] = rng.uniform01();
        return points;
    }
    std::vector<std::size_t> perm(count);
    for (int j = 0; j < dim; ++j) {
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        rng.shuffle(perm);
        for (int i = 0; i < count; ++i) {
            points[i][j] = (static_cast<double>(perm[i]) + rng.uniform01()) /
                           static_cast<double>(count);
        }
    }
    return points;
}

std::vector<double> predict(const std::vector<surrogate::GpModel>& models,
                            const Eigen::VectorXd& point) {
    return surrogate::posterior_batch(models, point);
}

double distance_to_region_box(const std::vector<double>& predicted,
                              const stats::RegionOfInterest& region) {
    double score = 0.0;
    for (int i = 0; i < region.num_constrained(); ++i) {
        const double above = std::max(predicted[i] - region.high[i], 0.0);
        const double below = std::max(region.low[i] - predicted[i], 0.0);
        score += above * above + below * below;
    }
    return score;
}

}  // namespace

std::vector<Configuration> sample_initial_pool(const SearchSpace& space, int n0,
                                               std::uint64_t seed,
                                               ConfigId first_id) {
    if (n0 < 1) throw std::invalid_argument("pool size must be positive");
    const auto unit = lhs_unit(space.dim(), n0, seed);
    std::vector<Configuration> pool;
    pool.reserve(unit.size());
    for (std::size_t i = 0; i < unit.size(); ++i) {
        pool.emplace_back(space.from_unit(unit[i]), first_id + i);
    }
    return pool;
}

pareto::ReferencePoint initial_reference(const stats::RegionOfInterest& region,
                                         std::span<const EvalRecord> pool_records) {
    if (pool_records.empty()) throw std::invalid_argument("empty initial pool");
    pareto::ReferencePoint reference;
    reference.values = region.high;
    const std::size_t free_index = region.low.size();
    double free_max = -std::numeric_limits<double>::infinity();
    for (const auto& rec : pool_records) {
        free_max = std::max(free_max, rec.val_means.at(free_index));
    }
    reference.values.push_back(free_max);
    return reference;
}

void update_reference_free_coord(AcquisitionState& state,
                                 std::span<const Eigen::VectorXd> candidate_points) {
    if (state.models.empty()) throw std::logic_error("models must be fitted first");
    const int c = state.region.num_constrained();
    const std::size_t free_index = static_cast<std::size_t>(c);

    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    const auto consider = [&](const Eigen::VectorXd& point) {
        const auto predicted = predict(state.models, point);
        for (int i = 0; i < c; ++i) {
            if (!(predicted[i] < state.region.low[i])) return;
        }
        found = true;
        best = std::min(best, predicted[free_index]);
    };
    for (const auto& point : candidate_points) consider(point);
    const auto& evaluated = state.models.front().train_inputs();
    for (Eigen::Index r = 0; r < evaluated.rows(); ++r) {
        consider(evaluated.row(r).transpose());
    }

    if (found) {
        state.low_region_free_min = best;
        // monotone tightening, capped at the initialization value
        state.reference.values[free_index] =
            std::min(state.reference.values[free_index], best);
    }
}

Proposal propose_next(const AcquisitionState& state,
                      std::span<const Eigen::VectorXd> candidate_points) {
    if (candidate_points.empty()) throw std::invalid_argument("no candidates to score");
    const std::size_t free_index =
        static_cast<std::size_t>(state.region.num_constrained());

    Proposal best;
    std::ptrdiff_t best_index = -1;
    double best_free = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> predictions(candidate_points.size());

    for (std::size_t idx = 0; idx < candidate_points.size(); ++idx) {
        predictions[idx] = predict(state.models, candidate_points[idx]);
        const pareto::ObjectivePoint point(predictions[idx]);
        const double improvement =
            pareto::hvi(point, state.archive, state.reference.values);
        const double free_value = predictions[idx][free_index];
        if (improvement > best.acquisition ||
            (improvement == best.acquisition && best_index >= 0 &&
             improvement > 0.0 && free_value < best_free)) {
            best.acquisition = improvement;
            best_index = static_cast<std::ptrdiff_t>(idx);
            best_free = free_value;
        }
    }

    if (best_index < 0) {
        // nothing improves the hypervolume yet; move toward the region box
        best.fallback = true;
        double best_score = std::numeric_limits<double>::infinity();
        for (std::size_t idx = 0; idx < candidate_points.size(); ++idx) {
            const double score = distance_to_region_box(predictions[idx], state.region);
            const double free_value = predictions[idx][free_index];
            if (score < best_score ||
                (score == best_score && free_value < best_free)) {
                best_score = score;
                best_free = free_value;
                best_index = static_cast<std::ptrdiff_t>(idx);
            }
        }
        best.acquisition = 0.0;
    }

    best.unit_point = candidate_points[static_cast<std::size_t>(best_index)];
    best.predicted = predictions[static_cast<std::size_t>(best_index)];
    return best;
}

std::string iteration_log_jsonl(std::span<const IterationLogEntry> entries) {
    std::string out;
    for (const auto& e : entries) {
        json line;
        line["iteration"] = e.iteration;
        line["reference"] = e.reference;
        line["proposed"] = e.proposed;
        line["predicted"] = e.predicted;
        line["realized"] = e.realized;
        out += line.dump();
        out += '\n';
    }
    return out;
}

namespace {

struct FiniteSnapper {
    std::vector<Eigen::VectorXd> listed_unit;
    std::vector<Eigen::VectorXd> listed_raw;
    std::vector<bool> used;

    explicit FiniteSnapper(const SearchSpace& space,
                           const std::vector<Eigen::VectorXd>& raw) {
        for (const auto& p : raw) {
            listed_raw.push_back(p);
            listed_unit.push_back(space.to_unit(p));
        }
        used.assign(raw.size(), false);
    }

    std::ptrdiff_t nearest_unused(const Eigen::VectorXd& unit) const {
        std::ptrdiff_t best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < listed_unit.size(); ++i) {
            if (used[i]) continue;
            const double d = (listed_unit[i] - unit).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<std::ptrdiff_t>(i);
            }
        }
        return best;
    }

    std::vector<Eigen::VectorXd> unused_unit() const {
        std::vector<Eigen::VectorXd> out;
        for (std::size_t i = 0; i < listed_unit.size(); ++i) {
            if (!used[i]) out.push_back(listed_unit[i]);
        }
        return out;
    }

    std::ptrdiff_t index_of_unit(const Eigen::VectorXd& unit) const {
        for (std::size_t i = 0; i < listed_unit.size(); ++i) {
            if ((listed_unit[i] - unit).lpNorm<Eigen::Infinity>() <= 1e-12) {
                return static_cast<std::ptrdiff_t>(i);
            }
        }
        return -1;
    }
};

}  // namespace

std::vector<Configuration> project_candidates(
    const objectives::ObjectiveProvider& objective, const SearchSpace& space,
    std::span<const Eigen::VectorXd> unit_points, ConfigId first_id) {
    std::vector<Configuration> out;
    const auto& finite = objective.finite_points();
    if (finite.empty()) {
        for (std::size_t i = 0; i < unit_points.size(); ++i) {
            out.emplace_back(space.from_unit(unit_points[i]), first_id + i);
        }
        return out;
    }
    FiniteSnapper snapper(space, finite);
    for (const auto& u : unit_points) {
        const auto idx = snapper.nearest_unused(u);
        if (idx < 0) break;
        snapper.used[static_cast<std::size_t>(idx)] = true;
        out.emplace_back(snapper.listed_raw[static_cast<std::size_t>(idx)],
                         first_id + out.size());
    }
    return out;
}

BoResult run_bo(const objectives::ObjectiveProvider& objective,
                const SearchSpace& space, const RiskSpec& spec,
                const stats::RegionOfInterest& region, const BOConfig& config,
                std::size_t k, std::uint64_t eval_seed) {
    config.validate();
    spec.validate();
    if (region.num_constrained() != spec.num_constrained()) {
        throw std::invalid_argument("region and risk spec disagree on constraints");
    }
    const auto& finite = objective.finite_points();
    if (!finite.empty() && static_cast<std::size_t>(config.budget) > finite.size()) {
        throw std::invalid_argument("budget exceeds the finite configuration list");
    }

    BoResult result;
    const int n_objectives = spec.num_objectives();

    std::optional<FiniteSnapper> snapper;
    if (!finite.empty()) snapper.emplace(space, finite);

    const auto evaluate_one = [&](const Configuration& cfg) -> bool {
        try {
            EvalRecord record = objectives::evaluate_record(objective, cfg, k, eval_seed);
            const auto violations = validate_record(record, spec, space);
            if (!violations.empty()) {
                result.error = "invalid evaluation record: " + violations.front();
                return false;
            }
            result.records.push_back(std::move(record));
            return true;
        } catch (const std::exception& e) {
            result.error = e.what();
            return false;
        }
    };

    // initial pool
    {
        auto pool_unit = lhs_unit(space.dim(), config.init_size,
                                  derive_seed(config.seed, "init"));
        for (std::size_t i = 0; i < pool_unit.size(); ++i) {
            Configuration cfg;
            if (snapper) {
                const auto idx = snapper->nearest_unused(pool_unit[i]);
                snapper->used[static_cast<std::size_t>(idx)] = true;
                cfg = Configuration(snapper->listed_raw[static_cast<std::size_t>(idx)],
                                    static_cast<ConfigId>(i));
            } else {
                cfg = Configuration(space.from_unit(pool_unit[i]),
                                    static_cast<ConfigId>(i));
            }
            if (!evaluate_one(cfg)) return result;
        }
    }

    AcquisitionState state;
    state.region = region;
    state.reference = initial_reference(region, result.records);
    state.reference_free_cap = state.reference.values.back();

    std::map<ConfigId, Eigen::VectorXd> unit_by_id;
    for (const auto& rec : result.records) {
        unit_by_id.emplace(rec.config.id, space.to_unit(rec.config.values));
    }

    const int iterations = config.budget - config.init_size;
    for (int t = 0; t < iterations; ++t) {
        // fit one surrogate per objective on everything evaluated so far
        Eigen::MatrixXd inputs(result.records.size(), space.dim());
        for (std::size_t r = 0; r < result.records.size(); ++r) {
            inputs.row(r) = unit_by_id.at(result.records[r].config.id).transpose();
        }
        state.models.clear();
        for (int obj = 0; obj < n_objectives; ++obj) {
            Eigen::VectorXd targets(result.records.size());
            for (std::size_t r = 0; r < result.records.size(); ++r) {
                targets[r] = result.records[r].val_means[obj];
            }
            surrogate::FitConfig fit;
            fit.seed = derive_seed(config.seed, "fit",
                                   static_cast<std::uint64_t>(t) * 16 + obj);
            state.models.push_back(surrogate::fit_gp(inputs, targets, fit));
        }

        // evaluated-loss Pareto front with owners
        state.archive = pareto::ParetoArchive();
        for (const auto& rec : result.records) {
            state.archive.insert(
                pareto::ObjectivePoint(rec.val_means, rec.config.id));
        }

        // candidate pool: fresh LHS plus Gaussian perturbations of the
        // front owners; finite spaces score every unevaluated entry instead
        std::vector<Eigen::VectorXd> candidates;
        if (snapper) {
            candidates = snapper->unused_unit();
            if (candidates.empty()) break;
        } else {
            candidates = lhs_unit(space.dim(), config.candidate_pool_size,
                                  derive_seed(config.seed, "pool", t));
            Rng perturb_rng(derive_seed(config.seed, "perturb", t));
            const auto& front = state.archive.points();
            for (int p = 0; p < config.perturbation_count && !front.empty(); ++p) {
                const auto& owner =
                    front[perturb_rng.uniform_below(front.size())];
                Eigen::VectorXd point = unit_by_id.at(*owner.owner);
                for (Eigen::Index j = 0; j < point.size(); ++j) {
                    point[j] = std::clamp(
                        point[j] + config.perturbation_sigma * perturb_rng.normal(),
                        0.0, 1.0);
                }
                candidates.push_back(std::move(point));
            }
        }

        update_reference_free_coord(state, candidates);
        const Proposal proposal = propose_next(state, candidates);

        Configuration next;
        const ConfigId next_id = static_cast<ConfigId>(result.records.size());
        if (snapper) {
            const auto idx = snapper->index_of_unit(proposal.unit_point);
            snapper->used[static_cast<std::size_t>(idx)] = true;
            next = Configuration(snapper->listed_raw[static_cast<std::size_t>(idx)],
                                 next_id);
        } else {
            next = Configuration(space.from_unit(proposal.unit_point), next_id);
        }

        if (!evaluate_one(next)) return result;
        unit_by_id.emplace(next.id, space.to_unit(next.values));

        IterationLogEntry entry;
        entry.iteration = t;
        entry.reference = state.reference.values;
        entry.proposed.assign(next.values.data(),
                              next.values.data() + next.values.size());
        entry.predicted = proposal.predicted;
        entry.realized = result.records.back().val_means;
        result.log.push_back(std::move(entry));
    }

    result.completed = true;
    return result;
}

}  // namespace riskbo::bo
