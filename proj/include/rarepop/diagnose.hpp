#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rarepop/numeric.hpp"

// Convergence diagnostics and the frequentist replication metrics: Geweke's
// two-window z score, the Raftery-Lewis run-length diagnostic, shortest HPD
// intervals, and the RMSE/RAE/coverage/width summaries.

namespace rarepop {

namespace detail {

inline double mean_of(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Spectral density at zero via a Bartlett lag window of width floor(sqrt(n)).
inline double spectral_variance(std::span<const double> xs) {
    const std::size_t n = xs.size();
    const double m = mean_of(xs);
    const auto gamma = [&](std::size_t k) {
        double s = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) s += (xs[t] - m) * (xs[t + k] - m);
        return s / static_cast<double>(n);
    };
    const auto window = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    double s = gamma(0);
    const double g0 = s;
    for (std::size_t k = 1; k <= window && k < n; ++k)
        s += 2.0 * (1.0 - static_cast<double>(k) / static_cast<double>(window + 1)) * gamma(k);
    if (g0 <= 0.0) throw std::domain_error("geweke: degenerate (zero-variance) series");
    return s > 0.0 ? s : g0;
}

}  // namespace detail

/// Geweke's convergence score: compare the means of the first and last parts
/// of the chain; asymptotically standard normal under stationarity.
inline double geweke_z(std::span<const double> series, double frac_first = 0.1,
                       double frac_last = 0.5) {
    const std::size_t n = series.size();
    if (!(frac_first > 0.0 && frac_last > 0.0 && frac_first + frac_last <= 1.0))
        throw std::domain_error("geweke: window fractions must be positive and non-overlapping");
    const auto na = static_cast<std::size_t>(std::floor(frac_first * static_cast<double>(n)));
    const auto nb = static_cast<std::size_t>(std::floor(frac_last * static_cast<double>(n)));
    if (na < 10 || nb < 10) throw std::domain_error("geweke: each window needs at least 10 draws");
    const auto first = series.subspan(0, na);
    const auto last = series.subspan(n - nb, nb);
    const double va = detail::spectral_variance(first) / static_cast<double>(na);
    const double vb = detail::spectral_variance(last) / static_cast<double>(nb);
    return (detail::mean_of(first) - detail::mean_of(last)) / std::sqrt(va + vb);
}

struct RafteryLewisResult {
    long n_min = 0;             // draws an i.i.d. chain would need
    long n_total = 0;           // burn-in + keep actually required
    long burn_in = 0;
    double dependence_factor = 0.0;  // n_total / n_min
};

/// Raftery-Lewis run-length diagnostic for estimating the q-quantile to
/// accuracy r with probability s: binary-chain reduction, first-order-Markov
/// thinning search by BIC, then the two-state-chain run-length bound.
inline RafteryLewisResult raftery_lewis(std::span<const double> series, double q = 0.025,
                                        double r = 0.005, double s = 0.95) {
    if (!(q > 0.0 && q < 1.0) || !(r > 0.0) || !(s > 0.0 && s < 1.0))
        throw std::domain_error("raftery_lewis: invalid (q, r, s)");
    const double phi = normal_quantile(0.5 * (1.0 + s));
    const auto n_min = static_cast<long>(std::ceil(q * (1.0 - q) * phi * phi / (r * r)));
    const auto n = static_cast<long>(series.size());
    if (n < n_min)
        throw std::domain_error("raftery_lewis: insufficient draws (need at least " +
                                std::to_string(n_min) + ", have " + std::to_string(n) + ")");

    // empirical q-quantile (type 7)
    std::vector<double> sorted(series.begin(), series.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = (static_cast<double>(n) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double cutoff = sorted[lo] + (h - std::floor(h)) *
                          (sorted[std::min(lo + 1, sorted.size() - 1)] - sorted[lo]);

    std::vector<char> dichot(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) dichot[i] = series[i] <= cutoff ? 1 : 0;

    long kthin = 0;
    double bic = 1.0;
    std::vector<char> thinned;
    while (bic >= 0.0) {
        ++kthin;
        thinned.clear();
        for (std::size_t i = 0; i < dichot.size(); i += static_cast<std::size_t>(kthin))
            thinned.push_back(dichot[i]);
        if (thinned.size() < 8)
            throw std::domain_error("raftery_lewis: series too short to resolve thinning");
        double tran[2][2][2] = {};
        for (std::size_t t = 2; t < thinned.size(); ++t)
            tran[static_cast<int>(thinned[t - 2])][static_cast<int>(thinned[t - 1])]
                [static_cast<int>(thinned[t])] += 1.0;
        double g2 = 0.0;
        for (int i1 = 0; i1 < 2; ++i1)
            for (int i2 = 0; i2 < 2; ++i2)
                for (int i3 = 0; i3 < 2; ++i3) {
                    if (tran[i1][i2][i3] == 0.0) continue;
                    const double row = tran[i1][i2][0] + tran[i1][i2][1];
                    const double col = tran[0][i2][i3] + tran[1][i2][i3];
                    const double mid = tran[0][i2][0] + tran[0][i2][1] + tran[1][i2][0] + tran[1][i2][1];
                    const double fitted = row * col / mid;
                    g2 += 2.0 * tran[i1][i2][i3] * std::log(tran[i1][i2][i3] / fitted);
                }
        bic = g2 - 2.0 * std::log(static_cast<double>(thinned.size() - 2));
    }

    double pair[2][2] = {};
    for (std::size_t t = 1; t < thinned.size(); ++t)
        pair[static_cast<int>(thinned[t - 1])][static_cast<int>(thinned[t])] += 1.0;
    const double row0 = pair[0][0] + pair[0][1];
    const double row1 = pair[1][0] + pair[1][1];
    if (row0 == 0.0 || row1 == 0.0)
        throw std::domain_error("raftery_lewis: degenerate binary chain");
    const double a = pair[0][1] / row0;  // P(0 -> 1)
    const double b = pair[1][0] / row1;  // P(1 -> 0)
    if (a <= 0.0 || b <= 0.0)
        throw std::domain_error("raftery_lewis: degenerate binary chain");
    const double eps = 0.001;
    const double burn = std::ceil(std::log(eps * (a + b) / std::max(a, b)) /
                                  std::log(std::abs(1.0 - a - b)));
    const double keep = std::ceil((2.0 - a - b) * a * b * phi * phi /
                                  ((a + b) * (a + b) * (a + b) * r * r));
    RafteryLewisResult res;
    res.n_min = n_min;
    res.burn_in = static_cast<long>(burn) * kthin;
    res.n_total = res.burn_in + static_cast<long>(keep) * kthin;
    res.dependence_factor = static_cast<double>(res.n_total) / static_cast<double>(n_min);
    return res;
}

struct HpdInterval {
    double lower = 0.0;
    double upper = 0.0;
    double mass = 0.0;

    bool contains(double x) const { return x >= lower && x <= upper; }
    double width() const { return upper - lower; }
};

/// Shortest window over the sorted draws containing ceil(mass * n) of them.
inline HpdInterval hpd(std::span<const double> samples, double mass) {
    if (samples.size() < 20) throw std::domain_error("hpd: at least 20 samples required");
    if (!(mass > 0.0 && mass < 1.0)) throw std::domain_error("hpd: mass must lie in (0,1)");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const auto w = static_cast<std::size_t>(
        std::ceil(mass * static_cast<double>(sorted.size())));
    std::size_t best = 0;
    double best_width = sorted[w - 1] - sorted[0];
    for (std::size_t i = 1; i + w <= sorted.size(); ++i) {
        const double width = sorted[i + w - 1] - sorted[i];
        if (width < best_width) {
            best_width = width;
            best = i;
        }
    }
    return {sorted[best], sorted[best + w - 1], mass};
}

struct ReplicationRecord {
    double truth = 0.0;
    double estimate = 0.0;  // posterior mean
    HpdInterval interval;
};

struct ReplicationSummary {
    double rmse = 0.0;      // mean squared relative error
    double rae = 0.0;       // mean absolute relative error
    double coverage = 0.0;  // percent of intervals containing the truth
    double width = 0.0;     // mean interval width (ratio to truth when relative)
    std::optional<double> efficiency;
    long replications = 0;
};

/// Aggregate repeated-run records. Widths are reported relative to the truth
/// when relative_width is set (done for T and the rates); the efficiency is
/// Var(these estimates) / comparator_variance when a comparator is supplied.
inline ReplicationSummary summarize_replications(std::span<const ReplicationRecord> records,
                                                 bool relative_width = true,
                                                 std::optional<double> comparator_variance = {}) {
    if (records.size() < 2)
        throw std::domain_error("summarize_replications: at least 2 replications required");
    ReplicationSummary s;
    s.replications = static_cast<long>(records.size());
    double sum_est = 0.0;
    for (const auto& rec : records) {
        if (rec.truth == 0.0) throw std::domain_error("summarize_replications: zero truth");
        const double re = (rec.estimate - rec.truth) / rec.truth;
        s.rmse += re * re;
        s.rae += std::abs(re);
        s.coverage += rec.interval.contains(rec.truth) ? 1.0 : 0.0;
        s.width += relative_width ? rec.interval.width() / rec.truth : rec.interval.width();
        sum_est += rec.estimate;
    }
    const auto n = static_cast<double>(records.size());
    s.rmse /= n;
    s.rae /= n;
    s.coverage *= 100.0 / n;
    s.width /= n;
    if (comparator_variance) {
        const double mean_est = sum_est / n;
        double var = 0.0;
        for (const auto& rec : records) var += (rec.estimate - mean_est) * (rec.estimate - mean_est);
        var /= n - 1.0;
        if (*comparator_variance > 0.0) s.efficiency = var / *comparator_variance;
    }
    return s;
}

inline double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw std::domain_error("sample_variance: need at least 2 values");
    const double m = detail::mean_of(xs);
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    return v / (static_cast<double>(xs.size()) - 1.0);
}

}  // namespace rarepop
