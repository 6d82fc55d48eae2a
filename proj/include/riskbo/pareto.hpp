#pragma once

#include "riskbo/core.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace riskbo::pareto {

/// Point in objective space (c constrained losses + the free objective),
/// optionally tagged with the configuration that produced it.
struct ObjectivePoint {
    std::vector<double> values;
    std::optional<ConfigId> owner;

    ObjectivePoint() = default;
    explicit ObjectivePoint(std::vector<double> v,
                            std::optional<ConfigId> o = std::nullopt)
        : values(std::move(v)), owner(o) {}
};

/// Upper corner bounding hypervolume computation; points not strictly
/// below it in every coordinate earn no hypervolume.
struct ReferencePoint {
    std::vector<double> values;
};

/// u dominates v: componentwise <= with at least one strict inequality
/// (minimization). Throws on dimension mismatch.
bool dominates(std::span<const double> u, std::span<const double> v);
bool dominates(const ObjectivePoint& u, const ObjectivePoint& v);

/// Mutually non-dominated set. Inserting a dominated (or duplicate) point
/// leaves the archive unchanged; inserting a dominating point evicts
/// whatever it dominates.
class ParetoArchive {
public:
    ParetoArchive() = default;

    // returns true when the point was added
    bool insert(ObjectivePoint point);

    bool covers(std::span<const double> values) const;  // dominated-or-equal

    const std::vector<ObjectivePoint>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }

private:
    std::vector<ObjectivePoint> points_;
};

/// Non-dominated subset of the input; duplicates collapse to the first
/// occurrence by insertion order.
ParetoArchive pareto_front(std::span<const ObjectivePoint> points);

/// Exact hypervolume dominated by the points below the reference point,
/// for 2 <= d <= 4. Points that do not strictly dominate the reference
/// contribute nothing.
double hypervolume(std::span<const ObjectivePoint> points,
                   std::span<const double> reference);
double hypervolume(const ParetoArchive& archive,
                   std::span<const double> reference);

/// Marginal hypervolume gained by adding candidate to the archive.
double hvi(const ObjectivePoint& candidate, const ParetoArchive& archive,
           std::span<const double> reference);

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Monte Carlo estimate of the same measure; serves as an independent
/// check of the exact sweep.
McEstimate hypervolume_mc(std::span<const ObjectivePoint> points,
                          std::span<const double> reference,
                          std::size_t n_samples, std::uint64_t seed);

}  // namespace riskbo::pareto
