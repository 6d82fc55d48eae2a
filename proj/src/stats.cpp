#include "riskbo/stats.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace riskbo::stats {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_p_value_domain(double lhat, long m, double alpha) {
    if (!(lhat >= 0.0 && lhat <= 1.0)) {
        throw std::invalid_argument("empirical loss must lie in [0,1]");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0,1)");
    }
    if (m < 1) throw std::invalid_argument("sample count must be positive");
}

double log_add_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log P(Binom(n,p) = i)
double log_binom_pmf(long i, long n, double p) {
    return std::lgamma(static_cast<double>(n) + 1.0) -
           std::lgamma(static_cast<double>(i) + 1.0) -
           std::lgamma(static_cast<double>(n - i) + 1.0) +
           static_cast<double>(i) * std::log(p) +
           static_cast<double>(n - i) * std::log1p(-p);
}

}  // namespace

double hoeffding_p_value(double lhat, long m, double alpha) {
    check_p_value_domain(lhat, m, alpha);
    const double gap = std::max(alpha - lhat, 0.0);
    return std::exp(-2.0 * static_cast<double>(m) * gap * gap);
}

double h1(double a, double b) {
    if (!(b > 0.0 && b < 1.0)) {
        throw std::invalid_argument("h1 requires b in (0,1)");
    }
    if (!(a >= 0.0 && a < 1.0) || a > b) {
        throw std::invalid_argument("h1 requires 0 <= a <= b < 1");
    }
    const double first = (a == 0.0) ? 0.0 : a * std::log(a / b);
    const double second = (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
    return first + second;
}

double log_binom_cdf(long j, long n, double p) {
    if (n < 1) throw std::invalid_argument("binomial needs n >= 1");
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("binomial probability outside [0,1]");
    }
    if (j < 0) return kNegInf;
    if (j >= n) return 0.0;
    if (p == 0.0) return 0.0;       // all mass at zero successes
    if (p == 1.0) return kNegInf;   // all mass at n, and j < n here

    const double mode = static_cast<double>(n) * p;
    double acc = kNegInf;
    for (long i = 0; i <= j; ++i) {
        const double lt = log_binom_pmf(i, n, p);
        acc = log_add_exp(acc, lt);
        // past the mode the terms only shrink; stop once they can no
        // longer move the accumulated sum
        if (static_cast<double>(i) > mode && lt < acc - 60.0) break;
    }
    return std::min(acc, 0.0);
}

double binom_cdf(long j, long n, double p) {
    const double lc = log_binom_cdf(j, n, p);
    return lc == kNegInf ? 0.0 : std::min(std::exp(lc), 1.0);
}

double hb_p_value(double lhat, long m, double alpha) {
    check_p_value_domain(lhat, m, alpha);
    const double a = std::min(lhat, alpha);
    const double log_kl_branch = -static_cast<double>(m) * h1(a, alpha);
    const long j = static_cast<long>(std::ceil(static_cast<double>(m) * lhat));
    const double log_bentkus_branch = 1.0 + log_binom_cdf(j, m, alpha);
    const double log_p = std::min(log_kl_branch, log_bentkus_branch);
    return std::min(std::exp(log_p), 1.0);
}

double bound_p_value(BoundKind bound, double lhat, long m, double alpha) {
    return bound == BoundKind::hoeffding ? hoeffding_p_value(lhat, m, alpha)
                                         : hb_p_value(lhat, m, alpha);
}

AlphaMax alpha_max(double alpha, double delta, long m, BoundKind bound) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0,1)");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("delta must lie in (0,1)");
    }
    if (m < 1) throw std::invalid_argument("sample count must be positive");

    if (bound == BoundKind::hoeffding) {
        const double value =
            alpha - std::sqrt(std::log(1.0 / delta) / (2.0 * static_cast<double>(m)));
        if (value <= 0.0) return {0.0, true};
        return {value, false};
    }

    // HB: p(t) is non-decreasing in t, so bisect for
    // sup { t in [0, alpha] : p(t) < delta }.
    if (!(hb_p_value(0.0, m, alpha) < delta)) return {0.0, true};
    double lo = 0.0;      // p(lo) < delta
    double hi = alpha;    // p(hi) = 1 >= delta
    for (int iter = 0; iter < 200 && hi - lo > 1e-9; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (hb_p_value(mid, m, alpha) < delta) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert(hb_p_value(lo, m, alpha) < delta);
    return {lo, false};
}

namespace {

// Exact binomial quantiles at level delta_prime around the alpha_max mean,
// found in a single cumulative pass.
struct BinomQuantiles {
    long q_lo = 0;
    long q_hi = 0;
};

BinomQuantiles binom_region_quantiles(long k, double p, double delta_prime) {
    BinomQuantiles q;
    if (p <= 0.0) return {0, 0};
    const double log_lo = std::log(delta_prime);
    const double log_hi = std::log1p(-delta_prime);
    double acc = kNegInf;
    long q_lo = -1;
    long q_hi = k;
    for (long i = 0; i <= k; ++i) {
        acc = log_add_exp(acc, log_binom_pmf(i, k, p));
        if (acc <= log_lo) q_lo = i;
        if (acc >= log_hi) {
            q_hi = i;
            break;
        }
    }
    q.q_lo = std::max<long>(q_lo, 0);
    q.q_hi = q_hi;
    return q;
}

}  // namespace

RegionOfInterest region_of_interest(const RiskSpec& spec, long k, long m) {
    spec.validate();
    if (k < 2 || m < 2) {
        throw std::invalid_argument("region of interest needs k, m >= 2");
    }

    RegionOfInterest region;
    region.bound = spec.bound;
    region.k = k;
    region.m = m;

    const double half_width =
        std::sqrt(std::log(1.0 / spec.delta_prime) / (2.0 * static_cast<double>(k)));

    for (double alpha : spec.alphas) {
        const AlphaMax am = alpha_max(alpha, spec.delta, m, spec.bound);
        region.degenerate |= am.degenerate;

        double low = 0.0;
        double high = 0.0;
        if (spec.bound == BoundKind::hoeffding) {
            low = am.value - half_width;
            high = am.value + half_width;
        } else {
            const auto q = binom_region_quantiles(k, am.value, spec.delta_prime);
            low = static_cast<double>(q.q_lo) / static_cast<double>(k);
            high = static_cast<double>(q.q_hi) / static_cast<double>(k);
        }
        low = std::clamp(std::min(low, am.value), 0.0, 1.0);
        high = std::clamp(std::max(high, am.value), 0.0, 1.0);
        if (high - low <= 0.0) region.degenerate = true;

        region.alpha_max.push_back(am.value);
        region.low.push_back(low);
        region.high.push_back(high);
    }
    return region;
}

RegionOfInterest whole_space_region(const RiskSpec& spec, long k, long m) {
    spec.validate();
    RegionOfInterest region;
    region.bound = spec.bound;
    region.k = k;
    region.m = m;
    region.alpha_max = spec.alphas;
    region.low.assign(spec.alphas.size(), 0.0);
    region.high.assign(spec.alphas.size(), 1.0);
    return region;
}

double combined_p_value(std::span<const double> per_constraint) {
    if (per_constraint.empty()) {
        throw std::invalid_argument("no per-constraint p-values");
    }
    double worst = 0.0;
    for (double p : per_constraint) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("p-values must lie in [0,1]");
        }
        worst = std::max(worst, p);
    }
    return worst;
}

double p_value_for_record(std::span<const double> constrained_means,
                          const RiskSpec& spec, long m, BoundKind bound) {
    if (static_cast<int>(constrained_means.size()) != spec.num_constrained()) {
        throw std::invalid_argument("expected one mean per constrained objective");
    }
    std::vector<double> per_constraint;
    per_constraint.reserve(constrained_means.size());
    for (int i = 0; i < spec.num_constrained(); ++i) {
        per_constraint.push_back(
            bound_p_value(bound, constrained_means[i], m, spec.alphas[i]));
    }
    return combined_p_value(per_constraint);
}

}  // namespace riskbo::stats
