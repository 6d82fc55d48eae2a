#include "riskbo/stats.hpp"

#include "riskbo/random.hpp"

#include <doctest.h>

#include <cmath>

using namespace riskbo;
using namespace riskbo::stats;

TEST_SUITE_BEGIN("stats");

TEST_CASE("hoeffding p-value closed forms") {
    CHECK(hoeffding_p_value(0.4, 50, 0.3) == 1.0);
    CHECK(hoeffding_p_value(0.2, 100, 0.3) ==
          doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
    // the algebraic inverse of the alpha_max formula lands exactly on delta
    const double delta = 0.1;
    const long m = 400;
    const double alpha = 0.3;
    const double lhat = alpha - std::sqrt(std::log(1.0 / delta) / (2.0 * m));
    CHECK(hoeffding_p_value(lhat, m, alpha) == doctest::Approx(delta).epsilon(1e-12));
    CHECK_THROWS_AS(hoeffding_p_value(-0.1, 10, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(hoeffding_p_value(0.1, 10, 1.5), std::invalid_argument);
}

TEST_CASE("h1 matches a high-precision evaluation") {
    CHECK(h1(0.3, 0.3) == 0.0);
    const long double oracle =
        0.2L * std::log(0.2L / 0.5L) + 0.8L * std::log(0.8L / 0.5L);
    CHECK(h1(0.2, 0.5) == doctest::Approx(static_cast<double>(oracle)).epsilon(1e-12));
    CHECK(h1(0.2, 0.5) == doctest::Approx(0.192745).epsilon(1e-5));
    CHECK(h1(0.0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(h1(0.2, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(h1(0.6, 0.5), std::invalid_argument);
}

TEST_CASE("binomial cdf exact values") {
    CHECK(binom_cdf(2, 10, 0.5) == doctest::Approx(56.0 / 1024.0).epsilon(1e-13));
    CHECK(binom_cdf(10, 10, 0.73) == 1.0);
    CHECK(binom_cdf(-1, 10, 0.3) == 0.0);
    CHECK(binom_cdf(0, 10, 0.0) == 1.0);

    // term-by-term extended-precision oracle
    long double sum = 0.0L;
    long double coeff = 1.0L;  // C(100, i) built incrementally
    for (int i = 0; i <= 40; ++i) {
        if (i > 0) coeff = coeff * (101.0L - i) / i;
        long double term = coeff;
        for (int b = 0; b < 100; ++b) term *= 0.5L;
        sum += term;
    }
    CHECK(binom_cdf(40, 100, 0.5) ==
          doctest::Approx(static_cast<double>(sum)).epsilon(1e-12));
}

TEST_CASE("hb p-value against direct branch evaluation") {
    CHECK(hb_p_value(0.5, 100, 0.3) == 1.0);
    CHECK(hb_p_value(0.3, 100, 0.3) == 1.0);

    // lhat=0.2, m=10, alpha=0.5: ceil(10*0.2)=2
    const double kl_branch = std::exp(-10.0 * h1(0.2, 0.5));
    const double bentkus_branch = std::exp(1.0) * (56.0 / 1024.0);
    CHECK(hb_p_value(0.2, 10, 0.5) ==
          doctest::Approx(std::min(kl_branch, bentkus_branch)).epsilon(1e-12));
    CHECK(hb_p_value(0.2, 10, 0.5) == doctest::Approx(0.145519).epsilon(1e-4));

    // both branches survive log-space evaluation far below double range
    const double tiny = hb_p_value(0.0, 5000, 0.05);
    CHECK(tiny >= 0.0);
    CHECK(tiny < 1e-100);
}

TEST_CASE("hb never exceeds hoeffding") {
    Rng rng(41);
    for (int i = 0; i < 1000; ++i) {
        const double lhat = rng.uniform01();
        const double alpha = 0.02 + 0.96 * rng.uniform01();
        const long m = 1 + static_cast<long>(rng.uniform_below(2000));
        CHECK(hb_p_value(lhat, m, alpha) <= hoeffding_p_value(lhat, m, alpha) + 1e-12);
    }
}

TEST_CASE("p-values are monotone in their arguments") {
    const long m = 200;
    const double alpha = 0.4;
    double prev_hf = 0.0;
    double prev_hb = 0.0;
    for (double lhat = 0.0; lhat <= 0.401; lhat += 0.02) {
        const double hf = hoeffding_p_value(lhat, m, alpha);
        const double hb = hb_p_value(lhat, m, alpha);
        CHECK(hf >= prev_hf - 1e-14);
        CHECK(hb >= prev_hb - 1e-14);
        prev_hf = hf;
        prev_hb = hb;
    }
    // non-increasing in alpha and m while lhat < alpha
    CHECK(hoeffding_p_value(0.1, m, 0.3) >= hoeffding_p_value(0.1, m, 0.35));
    CHECK(hb_p_value(0.1, m, 0.3) >= hb_p_value(0.1, m, 0.35));
    CHECK(hoeffding_p_value(0.1, 100, 0.3) >= hoeffding_p_value(0.1, 200, 0.3));
    CHECK(hb_p_value(0.1, 100, 0.3) >= hb_p_value(0.1, 200, 0.3));
}

TEST_CASE("alpha_max worked example and limits") {
    const auto am = alpha_max(0.05, 0.1, 5000, BoundKind::hoeffding);
    CHECK_FALSE(am.degenerate);
    CHECK(am.value == doctest::Approx(0.034826).epsilon(2e-5));

    // delta -> 1 shrinks the gap to zero
    const auto wide = alpha_max(0.3, 0.999999, 100, BoundKind::hoeffding);
    CHECK(wide.value == doctest::Approx(0.3).epsilon(1e-3));

    // too few samples: nothing can be certified
    CHECK(alpha_max(0.05, 0.1, 10, BoundKind::hoeffding).degenerate);
    CHECK(alpha_max(0.05, 0.1, 10, BoundKind::hoeffding_bentkus).degenerate);
}

TEST_CASE("hb alpha_max dominates hoeffding and rejects at delta") {
    // dense-grid oracle on one instance
    {
        const double alpha = 0.05;
        const double delta = 0.1;
        const long m = 5000;
        const auto hb = alpha_max(alpha, delta, m, BoundKind::hoeffding_bentkus);
        REQUIRE_FALSE(hb.degenerate);
        double best_grid = 0.0;
        for (long j = 0; j <= static_cast<long>(alpha * m); ++j) {
            const double t = static_cast<double>(j) / m;
            if (hb_p_value(t, m, alpha) < delta) best_grid = t;
        }
        CHECK(hb.value >= best_grid - 1e-9);
        CHECK(hb.value >= 0.034826 - 1e-4);  // at least as tight as hoeffding
        CHECK(hb.value < alpha);
        CHECK(hb_p_value(hb.value, m, alpha) < delta);
    }
    for (double alpha : {0.05, 0.1, 0.3, 0.6}) {
        for (double delta : {0.01, 0.1, 0.25}) {
            for (long m : {200L, 1000L, 5000L}) {
                const auto hf = alpha_max(alpha, delta, m, BoundKind::hoeffding);
                const auto hb = alpha_max(alpha, delta, m, BoundKind::hoeffding_bentkus);
                if (hf.degenerate) continue;
                CHECK(hb.value >= hf.value - 1e-9);
                CHECK(hb.value < alpha);
                CHECK(hb_p_value(hb.value, m, alpha) < delta);
            }
        }
    }
}

namespace {

RiskSpec make_spec(std::vector<double> alphas, BoundKind bound,
                   double delta = 0.1, double delta_prime = 1e-4) {
    RiskSpec spec;
    spec.alphas = std::move(alphas);
    spec.delta = delta;
    spec.delta_prime = delta_prime;
    spec.bound = bound;
    return spec;
}

}  // namespace

TEST_CASE("region of interest reproduces the closed-form hoeffding case") {
    const auto spec = make_spec({0.05}, BoundKind::hoeffding);
    const auto region = region_of_interest(spec, 5000, 5000);
    CHECK(region.alpha_max[0] == doctest::Approx(0.034826).epsilon(2e-5));
    CHECK(region.low[0] == doctest::Approx(0.004477).epsilon(2e-4));
    CHECK(region.high[0] == doctest::Approx(0.065175).epsilon(2e-5));
    CHECK_FALSE(region.degenerate);
}

TEST_CASE("region width shrinks with k and brackets alpha_max") {
    for (BoundKind bound : {BoundKind::hoeffding, BoundKind::hoeffding_bentkus}) {
        const auto spec = make_spec({0.2}, bound);
        double prev_width = 2.0;
        for (long k : {50L, 100L, 200L, 400L, 800L, 1600L, 3200L, 6400L}) {
            const auto region = region_of_interest(spec, k, 2000);
            const double width = region.high[0] - region.low[0];
            CHECK(width <= prev_width + 1e-12);
            CHECK(region.low[0] <= region.alpha_max[0]);
            CHECK(region.high[0] >= region.alpha_max[0]);
            CHECK(region.low[0] >= 0.0);
            CHECK(region.high[0] <= 1.0);
            prev_width = width;
        }
    }
}

TEST_CASE("alpha_max approaches alpha as m grows") {
    for (BoundKind bound : {BoundKind::hoeffding, BoundKind::hoeffding_bentkus}) {
        const double near = alpha_max(0.2, 0.1, 2000000, bound).value;
        CHECK(near > 0.2 - 2e-3);
        CHECK(near < 0.2);
    }
}

TEST_CASE("degenerate alpha_max propagates to the region") {
    const auto spec = make_spec({0.05}, BoundKind::hoeffding);
    const auto region = region_of_interest(spec, 100, 10);
    CHECK(region.degenerate);
    CHECK(region.alpha_max[0] == 0.0);
}

TEST_CASE("whole space region spans [0,1] per constraint") {
    const auto spec = make_spec({0.3, 0.4}, BoundKind::hoeffding_bentkus);
    const auto region = whole_space_region(spec, 100, 100);
    CHECK(region.low == std::vector<double>{0.0, 0.0});
    CHECK(region.high == std::vector<double>{1.0, 1.0});
    CHECK_FALSE(region.degenerate);
}

TEST_CASE("combined p-value is the max") {
    CHECK(combined_p_value(std::vector<double>{0.02}) == 0.02);
    CHECK(combined_p_value(std::vector<double>{0.02, 0.3}) == 0.3);
    CHECK(combined_p_value(std::vector<double>{1.0, 0.0}) == 1.0);
    CHECK_THROWS_AS(combined_p_value(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("record p-value matches per-constraint computation") {
    const auto spec = make_spec({0.5, 0.3}, BoundKind::hoeffding_bentkus);
    const std::vector<double> means = {0.2, 0.2};
    const double expected = std::max(hb_p_value(0.2, 10, 0.5), hb_p_value(0.2, 10, 0.3));
    CHECK(p_value_for_record(means, spec, 10, spec.bound) ==
          doctest::Approx(expected).epsilon(1e-14));

    // strongest possible evidence rejects, any violated mean never does
    CHECK(p_value_for_record(std::vector<double>{0.0, 0.0}, spec, 5000, spec.bound) <
          1e-6);
    CHECK(p_value_for_record(std::vector<double>{0.6, 0.1}, spec, 5000, spec.bound) ==
          1.0);
}

TEST_CASE("p-values stay super-uniform at the null boundary (smoke)") {
    // quick version of the acceptance study: true mean exactly alpha
    const double alpha = 0.1;
    const long m = 100;
    const int trials = 20000;
    Rng rng(99);
    int hf_hits = 0;
    int hb_hits = 0;
    const double u = 0.1;
    for (int t = 0; t < trials; ++t) {
        int successes = 0;
        for (long i = 0; i < m; ++i) successes += rng.bernoulli(alpha) ? 1 : 0;
        const double lhat = static_cast<double>(successes) / m;
        if (hoeffding_p_value(lhat, m, alpha) <= u) ++hf_hits;
        if (hb_p_value(lhat, m, alpha) <= u) ++hb_hits;
    }
    const double slack = 3.0 * std::sqrt(u * (1 - u) / trials);
    CHECK(static_cast<double>(hf_hits) / trials <= u + slack);
    CHECK(static_cast<double>(hb_hits) / trials <= u + slack);
}

TEST_SUITE_END();
