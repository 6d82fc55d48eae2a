#include "riskbo/pareto.hpp"

#include "riskbo/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace riskbo::pareto {

bool dominates(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw std::invalid_argument("objective dimension mismatch");
    }
    bool strict = false;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] > v[i]) return false;
        if (u[i] < v[i]) strict = true;
    }
    return strict;
}

bool dominates(const ObjectivePoint& u, const ObjectivePoint& v) {
    return dominates(std::span<const double>(u.values),
                     std::span<const double>(v.values));
}

bool ParetoArchive::covers(std::span<const double> values) const {
    for (const auto& p : points_) {
        if (p.values.size() != values.size()) {
            throw std::invalid_argument("objective dimension mismatch");
        }
        bool leq = true;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (p.values[i] > values[i]) {
                leq = false;
                break;
            }
        }
        if (leq) return true;
    }
    return false;
}

bool ParetoArchive::insert(ObjectivePoint point) {
    for (double v : point.values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("objective point must be finite");
        }
    }
    if (covers(point.values)) return false;
    std::erase_if(points_, [&](const ObjectivePoint& existing) {
        return dominates(point, existing);
    });
    points_.push_back(std::move(point));
    return true;
}

ParetoArchive pareto_front(std::span<const ObjectivePoint> points) {
    ParetoArchive archive;
    for (const auto& p : points) archive.insert(p);
    return archive;
}

namespace {

using Point = std::vector<double>;

// keep only points strictly below the reference in every coordinate
std::vector<Point> clip_points(std::span<const ObjectivePoint> points,
                               std::span<const double> reference) {
    std::vector<Point> kept;
    for (const auto& p : points) {
        if (p.values.size() != reference.size()) {
            throw std::invalid_argument("objective dimension mismatch");
        }
        bool inside = true;
        for (std::size_t j = 0; j < reference.size(); ++j) {
            if (!(p.values[j] < reference[j])) {
                inside = false;
                break;
            }
        }
        if (inside) kept.push_back(p.values);
    }
    return kept;
}

// 2-d: sort by the first coordinate and sum staircase rectangles
double hv2(std::vector<Point> pts, double r0, double r1) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        if (a[0] != b[0]) return a[0] < b[0];
        return a[1] < b[1];
    });
    double total = 0.0;
    double best_y = std::numeric_limits<double>::infinity();
    std::vector<Point> stairs;
    for (const auto& p : pts) {
        if (p[1] < best_y) {
            best_y = p[1];
            stairs.push_back(p);
        }
    }
    for (std::size_t i = 0; i < stairs.size(); ++i) {
        const double next_x = (i + 1 < stairs.size()) ? stairs[i + 1][0] : r0;
        total += (next_x - stairs[i][0]) * (r1 - stairs[i][1]);
    }
    return total;
}

// d >= 3: slice along the sorted last coordinate and recurse
double hv_recursive(std::vector<Point> pts, std::span<const double> reference) {
    const std::size_t d = reference.size();
    if (pts.empty()) return 0.0;
    if (d == 2) return hv2(std::move(pts), reference[0], reference[1]);

    std::sort(pts.begin(), pts.end(),
              [d](const Point& a, const Point& b) { return a[d - 1] < b[d - 1]; });

    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double z_lo = pts[i][d - 1];
        const double z_hi = (i + 1 < pts.size()) ? pts[i + 1][d - 1] : reference[d - 1];
        if (z_hi <= z_lo) continue;
        std::vector<Point> slice;
        slice.reserve(i + 1);
        for (std::size_t j = 0; j <= i; ++j) {
            slice.emplace_back(pts[j].begin(), pts[j].end() - 1);
        }
        total += (z_hi - z_lo) *
                 hv_recursive(std::move(slice), reference.subspan(0, d - 1));
    }
    return total;
}

void check_dim(std::size_t d) {
    if (d < 2 || d > 4) {
        throw std::invalid_argument(
            "exact hypervolume supports 2 to 4 objectives");
    }
}

}  // namespace

double hypervolume(std::span<const ObjectivePoint> points,
                   std::span<const double> reference) {
    check_dim(reference.size());
    auto kept = clip_points(points, reference);
    if (kept.empty()) return 0.0;
    return hv_recursive(std::move(kept), reference);
}

double hypervolume(const ParetoArchive& archive,
                   std::span<const double> reference) {
    return hypervolume(std::span<const ObjectivePoint>(archive.points()),
                       reference);
}

double hvi(const ObjectivePoint& candidate, const ParetoArchive& archive,
           std::span<const double> reference) {
    check_dim(reference.size());
    for (std::size_t j = 0; j < reference.size(); ++j) {
        if (!(candidate.values[j] < reference[j])) return 0.0;
    }
    if (archive.covers(candidate.values)) return 0.0;

    std::vector<ObjectivePoint> merged(archive.points().begin(),
                                       archive.points().end());
    merged.push_back(candidate);
    const double with = hypervolume(std::span<const ObjectivePoint>(merged), reference);
    const double without = hypervolume(archive, reference);
    return std::max(with - without, 0.0);
}

McEstimate hypervolume_mc(std::span<const ObjectivePoint> points,
                          std::span<const double> reference,
                          std::size_t n_samples, std::uint64_t seed) {
    const std::size_t d = reference.size();
    auto kept = clip_points(points, reference);
    if (kept.empty() || n_samples == 0) return {};

    std::vector<double> box_low(d);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = kept.front()[j];
        for (const auto& p : kept) lo = std::min(lo, p[j]);
        box_low[j] = lo;
    }
    double volume = 1.0;
    for (std::size_t j = 0; j < d; ++j) volume *= reference[j] - box_low[j];

    Rng rng(seed);
    std::vector<double> z(d);
    std::size_t hits = 0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        for (std::size_t j = 0; j < d; ++j) {
            z[j] = rng.uniform(box_low[j], reference[j]);
        }
        for (const auto& p : kept) {
            bool below = true;
            for (std::size_t j = 0; j < d; ++j) {
                if (p[j] > z[j]) {
                    below = false;
                    break;
                }
            }
            if (below) {
                ++hits;
                break;
            }
        }
    }
    const double frac = static_cast<double>(hits) / static_cast<double>(n_samples);
    McEstimate est;
    est.value = volume * frac;
    est.std_error =
        volume * std::sqrt(frac * (1.0 - frac) / static_cast<double>(n_samples));
    return est;
}

}  // namespace riskbo::pareto
