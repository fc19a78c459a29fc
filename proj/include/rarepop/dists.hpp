#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rarepop/numeric.hpp"
#include "rarepop/rng.hpp"

// Scalar distribution kernel: the truncated and standard distributions the
// models are built from, plus the zero-truncated-Poisson mean map and its
// numerical inverse. Everything is pure given an explicit RandomSource.

namespace rarepop {

struct TruncPoissonParam {
    double lambda;  // rate of the underlying Poisson, > 0
};

struct GammaParam {
    double shape;  // mean = shape/rate, variance = shape/rate^2
    double rate;
};

struct BetaParam {
    double a;  // mean = a/(a+b)
    double b;
};

namespace detail {

inline void require(bool ok, const char* msg) {
    if (!ok) throw std::domain_error(msg);
}

inline void check_lambda(double lambda) {
    require(lambda > 0.0 && std::isfinite(lambda),
            "truncated Poisson: lambda must be positive and finite");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Zero-truncated Poisson (support y >= 1)
// ---------------------------------------------------------------------------

inline double trunc_poisson_logpmf(long y, TruncPoissonParam p) {
    detail::check_lambda(p.lambda);
    detail::require(y >= 1, "truncated Poisson: y >= 1 required");
    return static_cast<double>(y) * std::log(p.lambda) - p.lambda -
           log_factorial(y) - log1mexp(p.lambda);
}

/// Mean of the zero-truncated Poisson: lambda / (1 - exp(-lambda)).
inline double trunc_poisson_mean(double lambda) {
    detail::check_lambda(lambda);
    return lambda / -std::expm1(-lambda);
}

/// d/dlambda of trunc_poisson_mean; needed for change-of-variable Jacobians.
inline double trunc_poisson_mean_deriv(double lambda) {
    detail::check_lambda(lambda);
    if (lambda < 1e-5) {
        // series: 1/2 + lambda/12 - lambda^3/720 + ...
        return 0.5 + lambda / 12.0;
    }
    const double om = -std::expm1(-lambda);          // 1 - e^-lambda
    const double num = om - lambda * std::exp(-lambda);
    return num / (om * om);
}

/// Solve trunc_poisson_mean(lambda) == lambda_prime for lambda.
/// Safeguarded Newton on the bracket (0, lambda_prime]; the mean map is
/// strictly increasing with limit 1 at 0+, so lambda_prime must exceed 1.
inline double inv_trunc_poisson_mean(double lambda_prime, double tol = 1e-10) {
    detail::require(lambda_prime > 1.0 && std::isfinite(lambda_prime),
                    "inv_trunc_poisson_mean: lambda_prime > 1 required");
    double lo = 0.0, hi = lambda_prime;
    // In the near-identity regime the curve hugs lambda' (Fig. 2 behaviour);
    // otherwise start from the first-order correction.
    double x = lambda_prime >= 10.0
                   ? lambda_prime
                   : std::max(lambda_prime - lambda_prime * std::exp(-lambda_prime), 1e-12);
    for (int it = 0; it < 200; ++it) {
        const double f = trunc_poisson_mean(x) - lambda_prime;
        if (std::abs(f) <= tol) return x;
        if (f > 0.0) hi = x; else lo = x;
        const double step = f / trunc_poisson_mean_deriv(x);
        double next = x - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // bisect fallback
        if (next == x) break;
        x = next;
    }
    return x;
}

namespace detail {

/// Untruncated Poisson sampler for large rates (Hormann's transformed
/// rejection, exact). Only called with lambda >= 10.
inline long poisson_sample_large(double lambda, RandomSource& rng) {
    const double log_rate = std::log(lambda);
    const double b = 0.931 + 2.53 * std::sqrt(lambda);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform_pos();
        const double us = 0.5 - std::abs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (kf < 0.0) continue;
        const long k = static_cast<long>(kf);
        if (us >= 0.07 && v <= v_r) return k;
        if (us < 0.013 && v > us) continue;
        const double s = std::log(v * inv_alpha / (a / (us * us) + b));
        const double t = -lambda + kf * log_rate - log_factorial(k);
        if (s <= t) return k;
    }
}

}  // namespace detail

/// Draw from the zero-truncated Poisson. Inverse cdf by forward summation for
/// lambda <= 30 (exact where truncation matters); for larger rates, rejection
/// from the untruncated Poisson, whose zero mass is below e^-30.
inline long trunc_poisson_sample(TruncPoissonParam p, RandomSource& rng) {
    detail::check_lambda(p.lambda);
    if (p.lambda <= 30.0) {
        const double target = rng.uniform_pos() * -std::expm1(-p.lambda);
        long y = 1;
        double pmf = p.lambda * std::exp(-p.lambda);
        double cum = pmf;
        while (cum < target && y < 4000) {
            ++y;
            pmf *= p.lambda / static_cast<double>(y);
            cum += pmf;
        }
        return y;
    }
    for (;;) {
        const long y = detail::poisson_sample_large(p.lambda, rng);
        if (y >= 1) return y;
    }
}

/// Zero-truncated Poisson additionally right-truncated at y_max, renormalized
/// over {1, ..., y_max}. Used by the capped toy-universe configurations.
inline long trunc_poisson_sample_capped(TruncPoissonParam p, long y_max, RandomSource& rng) {
    detail::check_lambda(p.lambda);
    detail::require(y_max >= 1, "capped truncated Poisson: y_max >= 1 required");
    double mass = 0.0;
    double pmf = p.lambda * std::exp(-p.lambda);
    std::vector<double> pmfs;
    pmfs.reserve(static_cast<std::size_t>(y_max));
    for (long y = 1; y <= y_max; ++y) {
        pmfs.push_back(pmf);
        mass += pmf;
        pmf *= p.lambda / static_cast<double>(y + 1);
    }
    const double target = rng.uniform_pos() * mass;
    double cum = 0.0;
    for (long y = 1; y <= y_max; ++y) {
        cum += pmfs[static_cast<std::size_t>(y - 1)];
        if (cum >= target) return y;
    }
    return y_max;
}

/// log of the mass the zero-truncated Poisson puts on {1, ..., y_max}.
inline double trunc_poisson_log_mass_below(TruncPoissonParam p, long y_max) {
    detail::check_lambda(p.lambda);
    detail::require(y_max >= 1, "trunc_poisson_log_mass_below: y_max >= 1");
    double mass = 0.0;
    double pmf = p.lambda * std::exp(-p.lambda);
    for (long y = 1; y <= y_max; ++y) {
        mass += pmf;
        pmf *= p.lambda / static_cast<double>(y + 1);
    }
    return std::log(mass) - log1mexp(p.lambda);
}

// ---------------------------------------------------------------------------
// Left-truncated binomial (support 1..n, normalizer 1 - (1-p)^n)
// ---------------------------------------------------------------------------

inline double trunc_binomial_logpmf(long k, long n, double p) {
    detail::require(p > 0.0 && p < 1.0, "truncated binomial: p in (0,1) required");
    detail::require(n >= 1, "truncated binomial: n >= 1 required");
    detail::require(k >= 1 && k <= n, "truncated binomial: k in [1, n] required");
    const double log_norm = log1mexp(-static_cast<double>(n) * std::log1p(-p));
    return lchoose(n, k) + static_cast<double>(k) * std::log(p) +
           static_cast<double>(n - k) * std::log1p(-p) - log_norm;
}

inline long trunc_binomial_sample(long n, double p, RandomSource& rng) {
    detail::require(p > 0.0 && p < 1.0, "truncated binomial: p in (0,1) required");
    detail::require(n >= 1, "truncated binomial: n >= 1 required");
    if (n == 1) return 1;
    // inverse cdf over [1, n] via the pmf recurrence
    const double q = 1.0 - p;
    const double norm = -std::expm1(static_cast<double>(n) * std::log1p(-p));
    const double target = rng.uniform_pos() * norm;
    double pmf = static_cast<double>(n) * p * std::pow(q, static_cast<double>(n - 1));
    double cum = pmf;
    long k = 1;
    while (cum < target && k < n) {
        pmf *= (static_cast<double>(n - k) / static_cast<double>(k + 1)) * (p / q);
        ++k;
        cum += pmf;
    }
    return k;
}

/// Mean of the left-truncated binomial by direct pmf summation.
inline double trunc_binomial_mean(long n, double p) {
    double m = 0.0;
    for (long k = 1; k <= n; ++k) m += static_cast<double>(k) * std::exp(trunc_binomial_logpmf(k, n, p));
    return m;
}

// ---------------------------------------------------------------------------
// Shifted multinomial: 1_R + Multinomial(X - R, (1/R) 1_R)
// ---------------------------------------------------------------------------

inline std::vector<long> shifted_multinomial_sample(long X, long R, RandomSource& rng) {
    detail::require(R >= 1, "shifted multinomial: R >= 1 required");
    detail::require(X >= R, "shifted multinomial: X >= R required");
    std::vector<long> c(static_cast<std::size_t>(R), 1);
    for (long t = 0; t < X - R; ++t) {
        c[static_cast<std::size_t>(rng.uniform_below(static_cast<std::uint64_t>(R)))] += 1;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Standard kernels
// ---------------------------------------------------------------------------

inline double normal_sample(RandomSource& rng) {
    const double u1 = rng.uniform_pos();
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline double gamma_logpdf(double x, GammaParam p) {
    detail::require(p.shape > 0.0 && p.rate > 0.0, "gamma: positive shape and rate required");
    if (x <= 0.0) return kNegInf;
    return p.shape * std::log(p.rate) - std::lgamma(p.shape) +
           (p.shape - 1.0) * std::log(x) - p.rate * x;
}

inline double gamma_sample(GammaParam p, RandomSource& rng) {
    detail::require(p.shape > 0.0 && p.rate > 0.0, "gamma: positive shape and rate required");
    // Marsaglia-Tsang; shape < 1 boosted through the u^(1/shape) trick
    double shape = p.shape;
    double boost = 1.0;
    if (shape < 1.0) {
        boost = std::pow(rng.uniform_pos(), 1.0 / shape);
        shape += 1.0;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal_sample(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform_pos();
        if (u < 1.0 - 0.0331 * x * x * x * x ||
            std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return boost * d * v / p.rate;
        }
    }
}

inline double beta_logpdf(double x, BetaParam p) {
    detail::require(p.a > 0.0 && p.b > 0.0, "beta: positive parameters required");
    if (x <= 0.0 || x >= 1.0) return kNegInf;
    return (p.a - 1.0) * std::log(x) + (p.b - 1.0) * std::log1p(-x) -
           (std::lgamma(p.a) + std::lgamma(p.b) - std::lgamma(p.a + p.b));
}

inline double beta_sample(BetaParam p, RandomSource& rng) {
    const double x = gamma_sample({p.a, 1.0}, rng);
    const double y = gamma_sample({p.b, 1.0}, rng);
    return x / (x + y);
}

/// Normal(mu, sd^2) truncated to (lower, inf): log density.
inline double truncnormal_below_logpdf(double x, double mu, double sd, double lower) {
    detail::require(sd > 0.0, "truncated normal: sd > 0 required");
    if (x <= lower) return kNegInf;
    const double z = (x - mu) / sd;
    const double zl = (lower - mu) / sd;
    const double log_tail = std::log(0.5 * std::erfc(zl / std::sqrt(2.0)));
    return -0.5 * std::log(2.0 * M_PI) - std::log(sd) - 0.5 * z * z - log_tail;
}

/// Normal(mu, sd^2) truncated to (lower, inf): draw.
inline double truncnormal_below_sample(double mu, double sd, double lower, RandomSource& rng) {
    detail::require(sd > 0.0, "truncated normal: sd > 0 required");
    const double zl = (lower - mu) / sd;
    if (zl < 0.75) {
        // plain rejection; acceptance >= Phi(-0.75) ~ 0.23
        for (;;) {
            const double z = normal_sample(rng);
            if (z > zl) return mu + sd * z;
        }
    }
    // Robert's exponential rejection for far tails
    const double a = 0.5 * (zl + std::sqrt(zl * zl + 4.0));
    for (;;) {
        const double e = -std::log(rng.uniform_pos()) / a;
        const double z = zl + e;
        const double rho = std::exp(-0.5 * (z - a) * (z - a));
        if (rng.uniform() <= rho) return mu + sd * z;
    }
}

}  // namespace rarepop
