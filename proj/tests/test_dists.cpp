#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "rarepop/dists.hpp"
#include "rarepop/numeric.hpp"
#include "rarepop/rng.hpp"

using namespace rarepop;

TEST_CASE("random source streams are reproducible and distinct", "[dists]") {
    RandomSource a(42, 7), b(42, 7), c(42, 8);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
    bool differs = false;
    RandomSource a2(42, 7);
    for (int i = 0; i < 16 && !differs; ++i) differs = a2.next_u64() != c.next_u64();
    REQUIRE(differs);
    RandomSource u(5);
    for (int i = 0; i < 10000; ++i) {
        const double x = u.uniform_pos();
        REQUIRE(x > 0.0);
        REQUIRE(x < 1.0);
    }
}

TEST_CASE("truncated poisson log pmf", "[dists]") {
    // direct evaluation: pmf(1; 1) = e^-1 / (1 - e^-1)
    const double oracle = std::exp(-1.0) / (1.0 - std::exp(-1.0));
    REQUIRE(trunc_poisson_logpmf(1, {1.0}) == Approx(std::log(oracle)).epsilon(1e-14));
    REQUIRE(trunc_poisson_logpmf(1, {1.0}) == Approx(-0.5413248546129181).margin(1e-14));

    // lambda -> 0+: point mass at 1
    REQUIRE(std::abs(trunc_poisson_logpmf(1, {1e-12})) < 1e-11);

    // normalization at several rates
    for (double lambda : {0.1, 1.0, 5.0, 20.0}) {
        double sum = 0.0;
        for (long y = 1; y <= 400; ++y) sum += std::exp(trunc_poisson_logpmf(y, {lambda}));
        REQUIRE(sum == Approx(1.0).margin(1e-12));
    }

    REQUIRE_THROWS_AS(trunc_poisson_logpmf(0, {1.0}), std::domain_error);
    REQUIRE_THROWS_AS(trunc_poisson_logpmf(1, {0.0}), std::domain_error);
    REQUIRE_THROWS_AS(trunc_poisson_logpmf(1, {-2.0}), std::domain_error);
}

TEST_CASE("truncated poisson sampling", "[dists]") {
    RandomSource rng(101);
    for (int i = 0; i < 10000; ++i) REQUIRE(trunc_poisson_sample({1e-4}, rng) == 1);

    // closed-form mean lambda/(1-e^-lambda) with a CLT band
    const double mean_oracle = trunc_poisson_mean(10.0);
    double sum = 0.0;
    long lo = 1 << 30;
    for (int i = 0; i < 100000; ++i) {
        const long y = trunc_poisson_sample({10.0}, rng);
        lo = std::min(lo, static_cast<long>(y));
        sum += static_cast<double>(y);
    }
    REQUIRE(lo >= 1);
    REQUIRE(sum / 1e5 == Approx(mean_oracle).margin(0.03));

    // the large-rate rejection path
    double sum_large = 0.0;
    for (int i = 0; i < 20000; ++i) sum_large += static_cast<double>(trunc_poisson_sample({40.0}, rng));
    REQUIRE(sum_large / 2e4 == Approx(trunc_poisson_mean(40.0)).margin(0.2));

    REQUIRE_THROWS_AS(trunc_poisson_sample({0.0}, rng), std::domain_error);
}

TEST_CASE("capped truncated poisson", "[dists]") {
    RandomSource rng(11);
    double mass = 0.0;
    for (long y = 1; y <= 3; ++y) mass += std::exp(trunc_poisson_logpmf(y, {2.5}));
    REQUIRE(trunc_poisson_log_mass_below({2.5}, 3) == Approx(std::log(mass)).margin(1e-12));
    long counts[4] = {};
    for (int i = 0; i < 30000; ++i) {
        const long y = trunc_poisson_sample_capped({2.5}, 3, rng);
        REQUIRE(y >= 1);
        REQUIRE(y <= 3);
        counts[y] += 1;
    }
    for (long y = 1; y <= 3; ++y) {
        const double expect = std::exp(trunc_poisson_logpmf(y, {2.5}) -
                                       trunc_poisson_log_mass_below({2.5}, 3));
        REQUIRE(static_cast<double>(counts[y]) / 30000.0 == Approx(expect).margin(0.012));
    }
}

TEST_CASE("truncated poisson mean map and inverse", "[dists]") {
    REQUIRE(trunc_poisson_mean(1.0) == Approx(1.5819767068693265).margin(1e-12));
    REQUIRE(trunc_poisson_mean(10.0) == Approx(10.000454019910097).margin(1e-9));
    REQUIRE(trunc_poisson_mean(1e-8) == Approx(1.0).margin(1e-7));

    // strictly increasing
    double prev = trunc_poisson_mean(1e-6);
    for (double l = 0.01; l <= 50.0; l += 0.13) {
        const double cur = trunc_poisson_mean(l);
        REQUIRE(cur > prev);
        prev = cur;
    }

    // round-trip identity across the full range
    for (double l = 1e-6; l <= 50.0; l = l < 0.1 ? l * 3.7 : l + 0.37) {
        const double back = inv_trunc_poisson_mean(trunc_poisson_mean(l));
        REQUIRE(back == Approx(l).margin(1e-9));
    }
    REQUIRE(inv_trunc_poisson_mean(1.5819767068693265) == Approx(1.0).margin(1e-9));
    REQUIRE(inv_trunc_poisson_mean(10.000454019910097) == Approx(10.0).margin(1e-9));
    REQUIRE_THROWS_AS(inv_trunc_poisson_mean(1.0), std::domain_error);
    REQUIRE_THROWS_AS(inv_trunc_poisson_mean(0.5), std::domain_error);

    // near-identity regime: lambda' - lambda < 0.01 for lambda >= 7
    for (double l = 7.0; l <= 60.0; l += 0.5)
        REQUIRE(trunc_poisson_mean(l) - l < 0.01);

    // derivative matches finite differences
    for (double l : {0.05, 0.7, 3.0, 15.0}) {
        const double h = 1e-6;
        const double fd = (trunc_poisson_mean(l + h) - trunc_poisson_mean(l - h)) / (2 * h);
        REQUIRE(trunc_poisson_mean_deriv(l) == Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("truncated binomial", "[dists]") {
    // hand-derived: (2 * 0.25) / (1 - 0.25) and 0.25 / 0.75
    REQUIRE(trunc_binomial_logpmf(1, 2, 0.5) == Approx(std::log(2.0 / 3.0)).margin(1e-14));
    REQUIRE(trunc_binomial_logpmf(2, 2, 0.5) == Approx(std::log(1.0 / 3.0)).margin(1e-14));
    // p -> 1 concentrates at k = n
    REQUIRE(trunc_binomial_logpmf(5, 5, 1.0 - 1e-9) == Approx(0.0).margin(1e-7));

    for (long n : {1L, 2L, 7L, 40L}) {
        for (double p : {0.05, 0.4, 0.9}) {
            double sum = 0.0;
            for (long k = 1; k <= n; ++k) sum += std::exp(trunc_binomial_logpmf(k, n, p));
            REQUIRE(sum == Approx(1.0).margin(1e-12));
        }
    }

    REQUIRE_THROWS_AS(trunc_binomial_logpmf(0, 2, 0.5), std::domain_error);
    REQUIRE_THROWS_AS(trunc_binomial_logpmf(3, 2, 0.5), std::domain_error);
    REQUIRE_THROWS_AS(trunc_binomial_logpmf(1, 2, 0.0), std::domain_error);
    REQUIRE_THROWS_AS(trunc_binomial_logpmf(1, 2, 1.0), std::domain_error);

    RandomSource rng(7);
    for (int i = 0; i < 2000; ++i) REQUIRE(trunc_binomial_sample(1, 0.3, rng) == 1);
    long ones = 0;
    for (int i = 0; i < 100000; ++i) {
        const long k = trunc_binomial_sample(2, 0.5, rng);
        REQUIRE(k >= 1);
        REQUIRE(k <= 2);
        ones += k == 1 ? 1 : 0;
    }
    REQUIRE(static_cast<double>(ones) / 1e5 == Approx(2.0 / 3.0).margin(0.005));

    // mean by pmf summation matches the sampler
    const double m = trunc_binomial_mean(40, 0.15);
    double sum = 0.0;
    for (int i = 0; i < 50000; ++i) sum += static_cast<double>(trunc_binomial_sample(40, 0.15, rng));
    REQUIRE(sum / 5e4 == Approx(m).margin(0.05));
}

TEST_CASE("shifted multinomial", "[dists]") {
    RandomSource rng(13);
    for (int i = 0; i < 100; ++i) {
        const auto c = shifted_multinomial_sample(5, 1, rng);
        REQUIRE(c == std::vector<long>{5});
    }
    REQUIRE(shifted_multinomial_sample(4, 4, rng) == std::vector<long>(4, 1));

    // (X=3, R=2): each arrangement with probability 1/2
    long first = 0;
    for (int i = 0; i < 20000; ++i) {
        const auto c = shifted_multinomial_sample(3, 2, rng);
        REQUIRE(c[0] + c[1] == 3);
        REQUIRE(c[0] >= 1);
        REQUIRE(c[1] >= 1);
        first += c[0] == 2 ? 1 : 0;
    }
    REQUIRE(static_cast<double>(first) / 2e4 == Approx(0.5).margin(0.012));

    for (int i = 0; i < 500; ++i) {
        const long r = 1 + static_cast<long>(rng.uniform_below(6));
        const long x = r + static_cast<long>(rng.uniform_below(20));
        const auto c = shifted_multinomial_sample(x, r, rng);
        long sum = 0;
        for (long cj : c) {
            REQUIRE(cj >= 1);
            sum += cj;
        }
        REQUIRE(sum == x);
    }
    REQUIRE_THROWS_AS(shifted_multinomial_sample(1, 2, rng), std::domain_error);
}

TEST_CASE("standard kernels", "[dists]") {
    // gamma mode (shape-1)/rate maximizes the log pdf over a grid
    const GammaParam g{3.0, 2.0};
    const double mode = (g.shape - 1.0) / g.rate;
    const double at_mode = gamma_logpdf(mode, g);
    for (double x = 0.05; x < 8.0; x += 0.05) REQUIRE(gamma_logpdf(x, g) <= at_mode + 1e-12);

    RandomSource rng(23);
    // half-normal mean sqrt(2/pi)
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double x = truncnormal_below_sample(0.0, 1.0, 0.0, rng);
        REQUIRE(x > 0.0);
        sum += x;
    }
    REQUIRE(sum / 1e5 == Approx(std::sqrt(2.0 / M_PI)).margin(0.01));

    // far-tail truncation path
    double sum_tail = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double x = truncnormal_below_sample(0.0, 1.0, 4.0, rng);
        REQUIRE(x > 4.0);
        sum_tail += x;
    }
    // E[Z | Z > a] = phi(a) / (1 - Phi(a))
    const double a = 4.0;
    const double tail_mean = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI) /
                             (0.5 * std::erfc(a / std::sqrt(2.0)));
    REQUIRE(sum_tail / 2e4 == Approx(tail_mean).margin(0.01));

    double sum_beta = 0.0;
    for (int i = 0; i < 100000; ++i) sum_beta += beta_sample({3.0, 1.0}, rng);
    REQUIRE(sum_beta / 1e5 == Approx(0.75).margin(0.005));

    double sum_gamma = 0.0;
    for (int i = 0; i < 100000; ++i) sum_gamma += gamma_sample({0.7, 2.0}, rng);
    REQUIRE(sum_gamma / 1e5 == Approx(0.35).margin(0.01));

    // truncated-normal density normalizes over its support
    double mass = 0.0;
    for (double x = 1.0 + 5e-4; x < 30.0; x += 1e-3)
        mass += std::exp(truncnormal_below_logpdf(x, 1.0, 2.0, 1.0)) * 1e-3;
    REQUIRE(mass == Approx(1.0).margin(1e-3));

    REQUIRE_THROWS_AS(gamma_logpdf(1.0, {0.0, 1.0}), std::domain_error);
    REQUIRE_THROWS_AS(beta_logpdf(0.5, {1.0, -1.0}), std::domain_error);
    REQUIRE_THROWS_AS(truncnormal_below_logpdf(1.0, 0.0, 0.0, 0.0), std::domain_error);
}

TEST_CASE("normal quantile and cdf", "[dists]") {
    REQUIRE(normal_quantile(0.975) == Approx(1.959963984540054).margin(1e-9));
    REQUIRE(normal_quantile(0.5) == Approx(0.0).margin(1e-12));
    REQUIRE(normal_cdf(normal_quantile(0.025)) == Approx(0.025).margin(1e-12));
    REQUIRE_THROWS_AS(normal_quantile(0.0), std::domain_error);
}
