#pragma once

#include "riskbo/core.hpp"

#include <span>
#include <vector>

namespace riskbo::stats {

/// Hoeffding tail p-value for the null "expected loss > alpha" given an
/// empirical mean lhat over m samples: exp(-2 m (alpha - lhat)_+^2).
double hoeffding_p_value(double lhat, long m, double alpha);

/// Bernoulli KL divergence h1(a,b) = a log(a/b) + (1-a) log((1-a)/(1-b)),
/// with the a=0 limit handled explicitly. Requires a <= b, b in (0,1).
double h1(double a, double b);

/// Exact lower-tail binomial CDF P(Binom(n,p) <= j), accumulated in
/// log-space so it stays stable up to n ~ 1e6. Returns the log directly.
double log_binom_cdf(long j, long n, double p);
double binom_cdf(long j, long n, double p);

/// Hoeffding-Bentkus p-value:
/// min( exp(-m h1(lhat ^ alpha, alpha)), e * P(Binom(m,alpha) <= ceil(m lhat)) ),
/// clipped to <= 1. Never exceeds hoeffding_p_value on the same inputs.
double hb_p_value(double lhat, long m, double alpha);

double bound_p_value(BoundKind bound, double lhat, long m, double alpha);

struct AlphaMax {
    double value = 0.0;
    bool degenerate = false;  // no empirical loss can be certified at delta
};

/// Largest empirical calibration loss that still rejects the null at level
/// delta. Closed form for Hoeffding; bisection on the p-value for HB.
AlphaMax alpha_max(double alpha, double delta, long m, BoundKind bound);

/// Validation-loss box around alpha_max that the guided search targets.
struct RegionOfInterest {
    std::vector<double> alpha_max;
    std::vector<double> low;
    std::vector<double> high;
    BoundKind bound = BoundKind::hoeffding_bentkus;
    long k = 0;
    long m = 0;
    bool degenerate = false;

    int num_constrained() const { return static_cast<int>(low.size()); }
};

/// Per-constraint interval around alpha_max built from the validation
/// sample size: Hoeffding half-widths, or exact binomial quantiles at
/// delta_prime for the HB family. The multi-constraint region is the
/// coordinate box (intersection of the per-coordinate slabs).
RegionOfInterest region_of_interest(const RiskSpec& spec, long k, long m);

/// Degenerate region spanning the whole objective space; running the
/// guided loop with it yields the plain HVI baseline.
RegionOfInterest whole_space_region(const RiskSpec& spec, long k, long m);

/// max over per-constraint p-values; valid for the combined null.
double combined_p_value(std::span<const double> per_constraint);

/// Applies the chosen bound to each constrained mean and combines.
double p_value_for_record(std::span<const double> constrained_means,
                          const RiskSpec& spec, long m, BoundKind bound);

}  // namespace riskbo::stats
