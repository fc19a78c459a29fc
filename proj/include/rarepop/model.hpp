#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <variant>
#include <vector>

#include "rarepop/design.hpp"
#include "rarepop/dists.hpp"
#include "rarepop/numeric.hpp"

// Log-density bookkeeping for the unit-level mixture: the complete-data
// likelihood factors, both lambda priors, hyperparameter elicitation, and the
// network-level baseline likelihood. All evaluations are pure.

namespace rarepop {

// ---------------------------------------------------------------------------
// Priors
// ---------------------------------------------------------------------------

struct IndependentLambdaPrior {
    double d = 1.1;              // Gamma shape for each component rate
    GammaParam nu_hyper{2.0, 2.0};  // (e, f) hyperprior on the Gamma rate nu
};

struct DependentLambdaPrior {
    double tau = 5.0;  // sd of the truncated-normal chain between neighbours
};

struct PriorConfig {
    BetaParam alpha_prior{3.0, 1.0};
    BetaParam beta_prior{15.0, 9.0};
    std::variant<IndependentLambdaPrior, DependentLambdaPrior> lambda_prior =
        IndependentLambdaPrior{};

    bool independent() const {
        return std::holds_alternative<IndependentLambdaPrior>(lambda_prior);
    }
    const IndependentLambdaPrior& ind() const {
        return std::get<IndependentLambdaPrior>(lambda_prior);
    }
    const DependentLambdaPrior& dep() const {
        return std::get<DependentLambdaPrior>(lambda_prior);
    }
};

/// Choose (e, f) so that the implied prior mean of lambda_j, d/(e/f), equals
/// the midrange of the observed counts, keeping the variance of nu small.
inline GammaParam elicit_independent_hyperparams(const std::vector<long>& y_s, double d,
                                                 double e = 2.0) {
    if (y_s.empty()) throw std::domain_error("elicitation: no observed counts");
    if (!(d > 0.0) || !(e > 0.0)) throw std::domain_error("elicitation: d, e must be positive");
    const auto [mn, mx] = std::minmax_element(y_s.begin(), y_s.end());
    const double midrange = 0.5 * (static_cast<double>(*mn) + static_cast<double>(*mx));
    if (!(midrange > 0.0)) throw std::domain_error("elicitation: observed counts are all zero");
    return {e, e * midrange / d};
}

// ---------------------------------------------------------------------------
// Observed data, distilled from an adaptive sample
// ---------------------------------------------------------------------------

struct ObservedComponent {
    long c = 0;                // cells in the observed network
    std::vector<long> y;       // per-cell counts, all >= 1
    long sum_y = 0;
    double sum_log_y_fact = 0.0;
};

struct ObservedData {
    long n_cells = 0;                 // N
    std::vector<long> sizes;          // ordered size sequence of the m draws
    std::vector<char> draw_nonempty;  // whether each draw was a non-empty network
    std::vector<ObservedComponent> comps;  // observed non-empty networks
    long recorded_draws = 0;
    long x_s = 0;
    long sum_y_s = 0;

    long r_s() const { return static_cast<long>(comps.size()); }

    static ObservedData from_sample(const AdaptiveSample& s) {
        ObservedData d;
        d.n_cells = s.n_cells;
        d.recorded_draws = s.m();
        d.sizes = s.ordered_sizes();
        for (const auto& w : s.networks) d.draw_nonempty.push_back(w.non_empty() ? 1 : 0);
        for (const auto& w : s.networks) {
            if (!w.non_empty()) continue;
            ObservedComponent oc;
            oc.c = w.size;
            oc.y = w.counts;
            for (long y : oc.y) {
                if (y < 1) throw std::domain_error("observed network has a cell count below 1");
                oc.sum_y += y;
                oc.sum_log_y_fact += log_factorial(y);
            }
            d.x_s += oc.c;
            d.sum_y_s += oc.sum_y;
            d.comps.push_back(std::move(oc));
        }
        return d;
    }
};

// ---------------------------------------------------------------------------
// Augmented state
// ---------------------------------------------------------------------------

struct MixtureParams {
    double alpha = 0.1;
    double beta = 0.1;
    double nu = 1.0;                  // Gamma rate for the independent prior
    std::vector<double> lambda_obs;   // one per observed component, unordered
    std::vector<double> lambda_unobs; // strictly increasing
};

struct AugmentedState {
    MixtureParams params;
    std::vector<long> alloc;    // unobserved cell -> component in [0, r_unobs)
    std::vector<long> y_unobs;  // per unobserved cell, >= 1

    long x_unobs() const { return static_cast<long>(alloc.size()); }
    long r_unobs() const { return static_cast<long>(params.lambda_unobs.size()); }

    std::vector<long> c_unobs() const {
        std::vector<long> c(params.lambda_unobs.size(), 0);
        for (long a : alloc) c[static_cast<std::size_t>(a)] += 1;
        return c;
    }
    long total(const ObservedData& data) const {
        long t = data.sum_y_s;
        for (long y : y_unobs) t += y;
        return t;
    }
};

/// Support restrictions for desk-scale exhaustive checks; unbounded defaults.
struct SupportCaps {
    long x_max = std::numeric_limits<long>::max();  // cap on X = X_s + X_unobs
    long r_max = std::numeric_limits<long>::max();  // cap on R = R_s + R_unobs
    long y_max = std::numeric_limits<long>::max();  // cap on each unobserved count

    bool unbounded_y() const { return y_max == std::numeric_limits<long>::max(); }
};

inline void validate_state(const ObservedData& data, const AugmentedState& st) {
    const auto fail = [](const char* msg) { throw std::domain_error(msg); };
    if (st.alloc.size() != st.y_unobs.size()) fail("state: alloc and y_unobs lengths differ");
    if (st.r_unobs() == 0 && st.x_unobs() != 0) fail("state: cells without components");
    if (st.r_unobs() > st.x_unobs()) fail("state: more unobserved components than cells");
    if (data.x_s + st.x_unobs() > data.n_cells) fail("state: X exceeds the number of grid cells");
    for (long a : st.alloc)
        if (a < 0 || a >= st.r_unobs()) fail("state: allocation label out of range");
    for (long y : st.y_unobs)
        if (y < 1) fail("state: unobserved count below 1");
    const auto c = st.c_unobs();
    for (long cj : c)
        if (cj < 1) fail("state: empty unobserved component");
    if (static_cast<long>(st.params.lambda_obs.size()) != data.r_s())
        fail("state: lambda_obs length does not match the observed components");
    for (double l : st.params.lambda_obs)
        if (!(l > 0.0) || !std::isfinite(l)) fail("state: non-positive observed rate");
    for (std::size_t j = 0; j < st.params.lambda_unobs.size(); ++j) {
        const double l = st.params.lambda_unobs[j];
        if (!(l > 0.0) || !std::isfinite(l)) fail("state: non-positive unobserved rate");
        if (j > 0 && !(st.params.lambda_unobs[j - 1] < l))
            fail("state: unobserved rates not strictly increasing");
    }
    if (!(st.params.alpha > 0.0 && st.params.alpha < 1.0)) fail("state: alpha outside (0,1)");
    if (!(st.params.beta > 0.0 && st.params.beta < 1.0)) fail("state: beta outside (0,1)");
}

// ---------------------------------------------------------------------------
// Likelihood factors. The complete-data likelihood is exactly their sum.
// ---------------------------------------------------------------------------

/// Selection probability of the observed ordered draws under the current
/// augmented network structure: sequential PPS without replacement over all
/// N - X + R networks. Exchangeability classes are (size, non-empty), so an
/// observed empty draw consumes an empty network and never conflates with an
/// unobserved non-empty singleton; a census then leaves no room for imputed
/// networks. All sizes sum to N, so the running denominator starts there.
inline double log_selection_factor(const ObservedData& data, const std::vector<long>& c_unobs) {
    long x = data.x_s;
    std::map<std::pair<long, bool>, long> avail;
    for (const auto& oc : data.comps) ++avail[{oc.c, true}];
    for (long c : c_unobs) {
        if (c < 1) throw std::domain_error("selection factor: network sizes must be >= 1");
        ++avail[{c, true}];
        x += c;
    }
    if (x > data.n_cells) return kNegInf;
    if (data.n_cells > x) avail[{1, false}] = data.n_cells - x;
    double denom = static_cast<double>(data.n_cells);
    double lp = 0.0;
    for (std::size_t j = 0; j < data.sizes.size(); ++j) {
        const long z = data.sizes[j];
        const auto it = avail.find({z, data.draw_nonempty[j] != 0});
        const long g = it == avail.end() ? 0 : it->second;
        if (g <= 0 || denom <= 0.0) return kNegInf;
        lp += std::log(static_cast<double>(z) * static_cast<double>(g)) - std::log(denom);
        --it->second;
        denom -= static_cast<double>(z);
    }
    return lp;
}

inline double log_count_factor(const ObservedData& data, const AugmentedState& st) {
    double lp = 0.0;
    for (std::size_t j = 0; j < data.comps.size(); ++j) {
        const auto& oc = data.comps[j];
        const double l = st.params.lambda_obs[j];
        lp += static_cast<double>(oc.sum_y) * std::log(l) - static_cast<double>(oc.c) * l -
              oc.sum_log_y_fact - static_cast<double>(oc.c) * log1mexp(l);
    }
    for (std::size_t i = 0; i < st.alloc.size(); ++i)
        lp += trunc_poisson_logpmf(st.y_unobs[i],
                                   {st.params.lambda_unobs[static_cast<std::size_t>(st.alloc[i])]});
    return lp;
}

/// Allocation factor for the latent allocation vector. The component sizes
/// are already priced by the size prior, and the artifact enforces the
/// consistency #{i: eps_i = j} = C_j, so the law of the allocation vector
/// given the sizes is uniform over the consistent assignments:
/// p(eps | C) = prod_j C_j! / X_unobs!. Observed cells' memberships are data
/// and contribute nothing. Summing over allocations is then exactly neutral,
/// which keeps the posterior of the unobserved structure governed by the
/// size prior and the selection record alone.
inline double log_alloc_factor(const std::vector<long>& c_unobs, long x_unobs) {
    if (x_unobs == 0) return 0.0;
    double lp = -log_factorial(x_unobs);
    for (long c : c_unobs) lp += log_factorial(c);
    return lp;
}

/// Shifted multinomial p(C | R, X): (X-R)! / prod (C_j - 1)! * R^{-(X-R)}.
inline double log_multinomial_factor(const std::vector<long>& c_all, long x, long r) {
    double lp = log_factorial(x - r) -
                static_cast<double>(x - r) * std::log(static_cast<double>(r));
    for (long c : c_all) lp -= log_factorial(c - 1);
    return lp;
}

inline double log_r_factor(long r, long x, double beta) {
    return trunc_binomial_logpmf(r, x, beta);
}

inline double log_x_factor(long x, long n_cells, double alpha) {
    return trunc_binomial_logpmf(x, n_cells, alpha);
}

inline double log_complete_data_likelihood(const ObservedData& data, const AugmentedState& st) {
    validate_state(data, st);
    const auto cu = st.c_unobs();
    std::vector<long> c_all;
    c_all.reserve(data.comps.size() + cu.size());
    for (const auto& oc : data.comps) c_all.push_back(oc.c);
    c_all.insert(c_all.end(), cu.begin(), cu.end());
    const long x = data.x_s + st.x_unobs();
    const long r = data.r_s() + st.r_unobs();
    if (r < 1) return kNegInf;  // the model assumes at least one non-empty network
    return log_selection_factor(data, cu) + log_count_factor(data, st) +
           log_alloc_factor(cu, st.x_unobs()) + log_multinomial_factor(c_all, x, r) +
           log_r_factor(r, x, st.params.beta) + log_x_factor(x, data.n_cells, st.params.alpha);
}

// ---------------------------------------------------------------------------
// Priors on (alpha, beta, nu, lambda)
// ---------------------------------------------------------------------------

/// Independent variant: Beta terms, Gamma(d, nu) on every rate, the R_unobs!
/// ordering normalizer, and the Gamma(e, f) hyperprior on nu. Dependent
/// variant: truncated-normal chain over the ordered unobserved rates with an
/// improper flat start, usable only inside ratios.
inline double log_prior(const MixtureParams& params, long r_unobs, const PriorConfig& priors) {
    if (r_unobs != static_cast<long>(params.lambda_unobs.size()))
        throw std::domain_error("log_prior: r_unobs does not match lambda_unobs");
    for (std::size_t j = 1; j < params.lambda_unobs.size(); ++j)
        if (!(params.lambda_unobs[j - 1] < params.lambda_unobs[j]))
            throw std::domain_error("log_prior: unobserved rates must be strictly increasing");
    double lp = beta_logpdf(params.alpha, priors.alpha_prior) +
                beta_logpdf(params.beta, priors.beta_prior);
    if (priors.independent()) {
        const auto& ip = priors.ind();
        lp += gamma_logpdf(params.nu, ip.nu_hyper);
        const GammaParam comp{ip.d, params.nu};
        for (double l : params.lambda_obs) lp += gamma_logpdf(l, comp);
        for (double l : params.lambda_unobs) lp += gamma_logpdf(l, comp);
        lp += log_factorial(r_unobs);
    } else {
        // truncated-normal chain over the full rate vector in increasing
        // order, observed and unobserved components interleaved; the flat
        // improper start is usable only inside ratios. Tethering unobserved
        // rates to their ordered neighbours keeps the posterior proper
        // whenever anything was observed.
        const double tau = priors.dep().tau;
        std::vector<double> all;
        all.reserve(params.lambda_obs.size() + params.lambda_unobs.size());
        all.insert(all.end(), params.lambda_obs.begin(), params.lambda_obs.end());
        all.insert(all.end(), params.lambda_unobs.begin(), params.lambda_unobs.end());
        std::sort(all.begin(), all.end());
        for (std::size_t k = 1; k < all.size(); ++k)
            lp += truncnormal_below_logpdf(all[k], all[k - 1], tau, all[k - 1]);
    }
    return lp;
}

// ---------------------------------------------------------------------------
// Network-level baseline: network totals are truncated Poisson(lambda * C_j)
// with a single shared rate; all structural factors are unchanged.
// ---------------------------------------------------------------------------

struct NetworkModelState {
    double alpha = 0.1;
    double beta = 0.1;
    double nu = 1.0;
    double lambda = 1.0;             // shared per-cell rate
    std::vector<long> c_unobs;       // unobserved network sizes, each >= 1
    std::vector<long> ytot_unobs;    // unobserved network totals, each >= 1

    long x_unobs() const {
        long x = 0;
        for (long c : c_unobs) x += c;
        return x;
    }
    long r_unobs() const { return static_cast<long>(c_unobs.size()); }
    long total(const ObservedData& data) const {
        long t = data.sum_y_s;
        for (long y : ytot_unobs) t += y;
        return t;
    }
};

inline void validate_network_state(const ObservedData& data, const NetworkModelState& st) {
    const auto fail = [](const char* msg) { throw std::domain_error(msg); };
    if (st.c_unobs.size() != st.ytot_unobs.size()) fail("network state: size mismatch");
    for (long c : st.c_unobs)
        if (c < 1) fail("network state: empty unobserved network");
    for (long y : st.ytot_unobs)
        if (y < 1) fail("network state: unobserved total below 1");
    if (data.x_s + st.x_unobs() > data.n_cells) fail("network state: X exceeds grid cells");
    if (!(st.lambda > 0.0) || !std::isfinite(st.lambda)) fail("network state: lambda must be positive");
    if (!(st.alpha > 0.0 && st.alpha < 1.0)) fail("network state: alpha outside (0,1)");
    if (!(st.beta > 0.0 && st.beta < 1.0)) fail("network state: beta outside (0,1)");
}

inline double network_model_log_likelihood(const ObservedData& data, const NetworkModelState& st) {
    validate_network_state(data, st);
    std::vector<long> c_all;
    c_all.reserve(data.comps.size() + st.c_unobs.size());
    for (const auto& oc : data.comps) c_all.push_back(oc.c);
    c_all.insert(c_all.end(), st.c_unobs.begin(), st.c_unobs.end());
    const long x = data.x_s + st.x_unobs();
    const long r = data.r_s() + st.r_unobs();
    if (r < 1) return kNegInf;
    double lp = log_selection_factor(data, st.c_unobs);
    for (const auto& oc : data.comps)
        lp += trunc_poisson_logpmf(oc.sum_y, {st.lambda * static_cast<double>(oc.c)});
    for (std::size_t j = 0; j < st.c_unobs.size(); ++j)
        lp += trunc_poisson_logpmf(st.ytot_unobs[j],
                                   {st.lambda * static_cast<double>(st.c_unobs[j])});
    lp += log_multinomial_factor(c_all, x, r) + log_r_factor(r, x, st.beta) +
          log_x_factor(x, data.n_cells, st.alpha);
    return lp;
}

/// Baseline prior: Beta terms plus Gamma(d, nu) on the shared rate with the
/// same nu hyperprior as the mixture's independent prior.
inline double network_model_log_prior(const NetworkModelState& st, const PriorConfig& priors) {
    if (!priors.independent())
        throw std::domain_error("network model: only the independent lambda prior is defined");
    const auto& ip = priors.ind();
    return beta_logpdf(st.alpha, priors.alpha_prior) + beta_logpdf(st.beta, priors.beta_prior) +
           gamma_logpdf(st.nu, ip.nu_hyper) + gamma_logpdf(st.lambda, {ip.d, st.nu});
}

}  // namespace rarepop
