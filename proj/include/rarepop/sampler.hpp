#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rarepop/model.hpp"
#include "rarepop/rng.hpp"

// Trans-dimensional MCMC for the unit-level mixture. One sweep applies, in
// order: (1) alpha, beta, nu and the component rates; (2) the unobserved
// counts and a one-cell birth/death on X_unobs; (3) a single-cell
// reallocation; (4) one split/combine attempt on the unobserved components.

namespace rarepop {

struct McmcConfig {
    long iterations = 20000;
    long burn_in = 2000;
    long thin = 18;
    std::uint64_t seed = 1;
    SupportCaps caps{};             // support restrictions for toy universes
    bool check_invariants = false;  // validate the state at every retained draw

    void validate() const {
        if (iterations < 1) throw std::domain_error("mcmc config: iterations must be positive");
        if (burn_in < 0 || burn_in >= iterations)
            throw std::domain_error("mcmc config: burn_in must lie in [0, iterations)");
        if (thin < 1) throw std::domain_error("mcmc config: thin must be >= 1");
    }
};

struct ComponentDraw {
    long label = 0;
    bool observed = false;
    double lambda = 0.0;
};

struct ChainDraw {
    long iter = 0;
    double alpha = 0.0;
    double beta = 0.0;
    double nu = 0.0;
    long x_unobs = 0;
    long r_unobs = 0;
    long total = 0;
    std::vector<ComponentDraw> components;
};

struct MoveStats {
    long proposed = 0;
    long accepted = 0;
    double rate() const {
        return proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
    }
};

struct Chain {
    std::vector<ChainDraw> draws;
    std::map<std::string, MoveStats> moves;
    McmcConfig config;
};

class MixtureSampler {
public:
    MixtureSampler(ObservedData data, PriorConfig priors, McmcConfig cfg)
        : data_(std::move(data)), priors_(std::move(priors)), cfg_(cfg),
          rng_(cfg.seed, 0) {
        cfg_.validate();
        if (data_.recorded_draws < 1)
            throw std::domain_error("fit: the sample must contain at least one network");
        init_state();
    }

    const ObservedData& data() const { return data_; }
    const PriorConfig& priors() const { return priors_; }
    AugmentedState& state() { return state_; }
    const AugmentedState& state() const { return state_; }
    RandomSource& rng() { return rng_; }

    Chain run() {
        Chain chain;
        chain.config = cfg_;
        const long kept = (cfg_.iterations - cfg_.burn_in) / cfg_.thin;
        chain.draws.reserve(static_cast<std::size_t>(std::max(0L, kept)));
        for (long it = 1; it <= cfg_.iterations; ++it) {
            sweep();
            if (it > cfg_.burn_in && (it - cfg_.burn_in) % cfg_.thin == 0) {
                if (cfg_.check_invariants) validate_state(data_, state_);
                chain.draws.push_back(record(it));
            }
        }
        chain.moves = moves_;
        return chain;
    }

    void sweep() {
        update_alpha();
        update_beta();
        update_nu();
        update_lambda();
        update_unobserved_counts();
        update_x_unobs();
        update_block();
        update_allocation();
        split_combine();
    }

    // -- step (1) ------------------------------------------------------------

    void update_alpha() {
        const long x = data_.x_s + state_.x_unobs();
        const long n = data_.n_cells;
        const auto& pr = priors_.alpha_prior;
        const double prop = beta_sample({pr.a + static_cast<double>(x),
                                         pr.b + static_cast<double>(n - x)}, rng_);
        // Beta x binomial terms cancel; what survives is the truncation ratio
        const double la = log1mexp(-static_cast<double>(n) * std::log1p(-state_.params.alpha)) -
                          log1mexp(-static_cast<double>(n) * std::log1p(-prop));
        accept("alpha", la, [&] { state_.params.alpha = prop; });
    }

    void update_beta() {
        const long x = data_.x_s + state_.x_unobs();
        const long r = data_.r_s() + state_.r_unobs();
        const auto& pr = priors_.beta_prior;
        const double prop = beta_sample({pr.a + static_cast<double>(r),
                                         pr.b + static_cast<double>(x - r)}, rng_);
        const double la = log1mexp(-static_cast<double>(x) * std::log1p(-state_.params.beta)) -
                          log1mexp(-static_cast<double>(x) * std::log1p(-prop));
        accept("beta", la, [&] { state_.params.beta = prop; });
    }

    /// Conjugate draw for the Gamma rate under the independent prior; no-op
    /// under the dependent prior, which has no nu.
    void update_nu() {
        if (!priors_.independent()) return;
        const auto& ip = priors_.ind();
        double sum_lambda = 0.0;
        for (double l : state_.params.lambda_obs) sum_lambda += l;
        for (double l : state_.params.lambda_unobs) sum_lambda += l;
        const double r_total = static_cast<double>(data_.r_s() + state_.r_unobs());
        state_.params.nu = gamma_sample({ip.nu_hyper.shape + r_total * ip.d,
                                         ip.nu_hyper.rate + sum_lambda}, rng_);
    }

    void update_lambda() {
        const auto cu = state_.c_unobs();
        std::vector<long> sum_yu(cu.size(), 0);
        for (std::size_t i = 0; i < state_.alloc.size(); ++i)
            sum_yu[static_cast<std::size_t>(state_.alloc[i])] += state_.y_unobs[i];
        for (std::size_t j = 0; j < state_.params.lambda_obs.size(); ++j)
            update_one_lambda(state_.params.lambda_obs[j], data_.comps[j].c,
                              data_.comps[j].sum_y, -1);
        for (std::size_t j = 0; j < state_.params.lambda_unobs.size(); ++j)
            update_one_lambda(state_.params.lambda_unobs[j], cu[j], sum_yu[j],
                              static_cast<long>(j));
    }

    // -- step (2) ------------------------------------------------------------

    /// Exact Gibbs on the unobserved counts: no other likelihood factor
    /// involves them, so the full conditional is the truncated Poisson itself.
    void update_unobserved_counts() {
        for (std::size_t i = 0; i < state_.alloc.size(); ++i) {
            const double l = state_.params.lambda_unobs[static_cast<std::size_t>(state_.alloc[i])];
            state_.y_unobs[i] = draw_count(l);
        }
    }

    void update_x_unobs() {
        if (rng_.uniform() < 0.5) propose_cell_birth(); else propose_cell_death();
    }

    /// Independence regeneration of the whole unobserved block from its exact
    /// structural conditionals given (alpha, beta, nu): X from the restricted
    /// truncated binomial, R from its conditional, sizes from the multinomial
    /// conditional, rates from the Gamma prior, allocation uniform, counts
    /// from the truncated Poisson. Those factors match the target exactly, so
    /// the acceptance ratio reduces to the selection record; the move renews
    /// the unobserved structure in one jump where single-cell moves diffuse.
    void update_block() {
        if (!priors_.independent()) return;
        auto& mv = moves_["block"];
        const long x_lo = std::max(data_.x_s, 1L);
        long x_hi = std::min(data_.n_cells, cfg_.caps.x_max);
        const long r_room = cfg_.caps.r_max - data_.r_s();
        if (r_room <= 0) x_hi = std::min(x_hi, data_.x_s);
        if (x_hi < x_lo) return;
        ++mv.proposed;

        AugmentedState next = state_;
        next.params.lambda_unobs.clear();
        next.alloc.clear();
        next.y_unobs.clear();

        // X' over the restricted range
        std::vector<double> lw(static_cast<std::size_t>(x_hi - x_lo + 1));
        for (long x = x_lo; x <= x_hi; ++x)
            lw[static_cast<std::size_t>(x - x_lo)] =
                trunc_binomial_logpmf(x, data_.n_cells, state_.params.alpha);
        const long x_new = x_lo + sample_log_weights(lw);
        const long xu_new = x_new - data_.x_s;
        // R' given X'
        long r_new = data_.r_s();
        if (xu_new > 0) {
            const long r_top = data_.r_s() + std::min(xu_new, r_room);
            std::vector<double> lr(static_cast<std::size_t>(r_top - data_.r_s()));
            for (long r = data_.r_s() + 1; r <= r_top; ++r)
                lr[static_cast<std::size_t>(r - data_.r_s() - 1)] =
                    trunc_binomial_logpmf(r, x_new, state_.params.beta);
            r_new = data_.r_s() + 1 + sample_log_weights(lr);
        }
        const long ru_new = r_new - data_.r_s();
        if (ru_new > 0) {
            const auto cu = shifted_multinomial_sample(xu_new, ru_new, rng_);
            next.params.lambda_unobs.resize(static_cast<std::size_t>(ru_new));
            for (auto& l : next.params.lambda_unobs)
                l = gamma_sample({priors_.ind().d, state_.params.nu}, rng_);
            std::sort(next.params.lambda_unobs.begin(), next.params.lambda_unobs.end());
            for (long j = 0; j < ru_new; ++j)
                next.alloc.insert(next.alloc.end(), static_cast<std::size_t>(cu[static_cast<std::size_t>(j)]),
                                  j);
            for (std::size_t i = next.alloc.size(); i > 1; --i)
                std::swap(next.alloc[i - 1], next.alloc[rng_.uniform_below(i)]);
            next.y_unobs.resize(next.alloc.size());
            for (std::size_t i = 0; i < next.alloc.size(); ++i)
                next.y_unobs[i] = draw_count(
                    next.params.lambda_unobs[static_cast<std::size_t>(next.alloc[i])]);
        }

        const double la = log_complete_data_likelihood(data_, next) +
                          log_prior(next.params, ru_new, priors_) + block_log_q(state_) -
                          log_likelihood_current() -
                          log_prior(state_.params, state_.r_unobs(), priors_) -
                          block_log_q(next);
        if (std::isfinite(la) && std::log(rng_.uniform_pos()) < la) {
            state_ = std::move(next);
            ++mv.accepted;
        }
    }

    // -- step (3) ------------------------------------------------------------

    void update_allocation() {
        auto& mv = moves_["alloc"];
        if (state_.r_unobs() < 2) return;
        const auto cu = state_.c_unobs();
        std::vector<std::size_t> movable;
        for (std::size_t i = 0; i < state_.alloc.size(); ++i)
            if (cu[static_cast<std::size_t>(state_.alloc[i])] >= 2) movable.push_back(i);
        if (movable.empty()) return;
        ++mv.proposed;
        const std::size_t cell = movable[rng_.uniform_below(movable.size())];
        const long from = state_.alloc[cell];
        long to = static_cast<long>(rng_.uniform_below(static_cast<std::uint64_t>(state_.r_unobs() - 1)));
        if (to >= from) ++to;
        const double before = log_likelihood_current();
        const double movable_before = static_cast<double>(movable.size());
        state_.alloc[cell] = to;
        const auto cu2 = state_.c_unobs();
        double movable_after = 0.0;
        for (long a : state_.alloc)
            if (cu2[static_cast<std::size_t>(a)] >= 2) movable_after += 1.0;
        const double la = log_likelihood_current() - before +
                          std::log(movable_before) - std::log(movable_after);
        if (std::log(rng_.uniform_pos()) < la) {
            ++mv.accepted;
        } else {
            state_.alloc[cell] = from;
        }
    }

    // -- step (4) ------------------------------------------------------------

    struct SplitProposal {
        bool genesis = false;      // creation of the first unobserved network
        long target = -1;          // component index being split
        double u1 = 0.0;
        double u2 = 0.0;
        long c1 = 0, c2 = 0;
        std::vector<std::size_t> to_first;  // cells reassigned to the low component
        double lambda1 = 0.0, lambda2 = 0.0;
        long genesis_y = 0;
        double log_pmf_c1 = 0.0;   // probability of the chosen cell split
        double log_p_alloc = 0.0;  // probability of the chosen allocation
        double log_jacobian = 0.0;
        double log_accept = kNegInf;
    };

    struct CombineProposal {
        bool genesis_death = false;
        long left = -1;  // positions (left, left+1) merge
        double lambda_star = 0.0;
        double log_accept = kNegInf;
    };

    void split_combine() {
        const double p_up = state_.r_unobs() == 0 ? 1.0 : 0.5;
        if (rng_.uniform() < p_up) {
            auto& mv = moves_[state_.r_unobs() == 0 ? "genesis_birth" : "split"];
            ++mv.proposed;
            auto prop = propose_split();
            if (prop && std::log(rng_.uniform_pos()) < prop->log_accept) {
                apply_split(*prop);
                ++mv.accepted;
            }
        } else {
            auto& mv = moves_[state_.r_unobs() == 1 ? "genesis_death" : "combine"];
            ++mv.proposed;
            auto prop = propose_combine();
            if (prop && std::log(rng_.uniform_pos()) < prop->log_accept) {
                apply_combine(*prop);
                ++mv.accepted;
            }
        }
    }

    /// Build a split (or genesis-birth) proposal with its acceptance log-ratio.
    /// Returns nullopt when no move of this kind exists from the current state.
    std::optional<SplitProposal> propose_split() {
        const long r = state_.r_unobs();
        if (r == 0) return propose_genesis_birth();
        if (data_.r_s() + r + 1 > cfg_.caps.r_max) return std::nullopt;
        const auto cu = state_.c_unobs();
        std::vector<long> eligible;
        for (long j = 0; j < r; ++j)
            if (cu[static_cast<std::size_t>(j)] >= 2) eligible.push_back(j);
        if (eligible.empty()) return std::nullopt;

        SplitProposal p;
        p.target = eligible[rng_.uniform_below(eligible.size())];
        const long c_star = cu[static_cast<std::size_t>(p.target)];
        p.u1 = beta_sample({2.0, 2.0}, rng_);
        p.c1 = std::clamp(std::lround(p.u1 * static_cast<double>(c_star)), 1L, c_star - 1);
        p.c2 = c_star - p.c1;
        p.log_pmf_c1 = log_cell_split_pmf(p.c1, c_star);

        // uniformly chosen subset of c1 cells moves to the low component
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < state_.alloc.size(); ++i)
            if (state_.alloc[i] == p.target) members.push_back(i);
        for (std::size_t i = 0; i < static_cast<std::size_t>(p.c1); ++i) {
            const std::size_t j = i + rng_.uniform_below(members.size() - i);
            std::swap(members[i], members[j]);
        }
        p.to_first.assign(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(p.c1));
        std::sort(p.to_first.begin(), p.to_first.end());
        p.log_p_alloc = -lchoose(c_star, p.c1);

        const double lam_star = state_.params.lambda_unobs[static_cast<std::size_t>(p.target)];
        const double lp_star = trunc_poisson_mean(lam_star);
        const double a = static_cast<double>(p.c1) / static_cast<double>(c_star);
        p.u2 = rng_.uniform_pos();
        const double lp1 = p.u2 * lp_star;
        const double lp2 = lp_star * (1.0 - a * p.u2) / (1.0 - a);
        if (lp1 <= 1.0) return with_rejected(p);  // no rate maps to a mean <= 1
        // ordering window among the unobserved components
        if (p.target > 0 &&
            lp1 <= trunc_poisson_mean(state_.params.lambda_unobs[static_cast<std::size_t>(p.target - 1)]))
            return with_rejected(p);
        if (p.target + 1 < r &&
            lp2 >= trunc_poisson_mean(state_.params.lambda_unobs[static_cast<std::size_t>(p.target + 1)]))
            return with_rejected(p);
        p.lambda1 = inv_trunc_poisson_mean(lp1, 1e-13);
        p.lambda2 = inv_trunc_poisson_mean(lp2, 1e-13);
        p.log_jacobian = std::log(trunc_poisson_mean_deriv(lam_star)) + std::log(lp_star) -
                         std::log1p(-a) - std::log(trunc_poisson_mean_deriv(p.lambda1)) -
                         std::log(trunc_poisson_mean_deriv(p.lambda2));

        const double before = log_likelihood_current() +
                              log_prior(state_.params, r, priors_);
        AugmentedState next = split_state(p);
        const double after = log_complete_data_likelihood(data_, next) +
                             log_prior(next.params, r + 1, priors_);
        // q_f = p_up * (1/|eligible|) * pmf(c1) * P_alloc * g(u2),  g uniform
        // q_r = p_down * 1/(adjacent pairs in the new state)
        const double log_qf = std::log(0.5) - std::log(static_cast<double>(eligible.size())) +
                              p.log_pmf_c1 + p.log_p_alloc;
        const double log_qr = std::log(0.5) - std::log(static_cast<double>(r));
        p.log_accept = after - before + log_qr - log_qf + p.log_jacobian;
        return p;
    }

    void apply_split(const SplitProposal& p) {
        if (p.genesis) {
            state_.params.lambda_unobs = {p.lambda1};
            state_.alloc = {0};
            state_.y_unobs = {p.genesis_y};
            return;
        }
        state_ = split_state(p);
    }

    std::optional<CombineProposal> propose_combine() {
        const long r = state_.r_unobs();
        if (r == 0) return std::nullopt;
        if (r == 1) {
            if (state_.x_unobs() != 1) return std::nullopt;
            CombineProposal p;
            p.genesis_death = true;
            const double lam = state_.params.lambda_unobs[0];
            const long y = state_.y_unobs[0];
            const double before = log_likelihood_current() +
                                  log_prior(state_.params, 1, priors_);
            AugmentedState next = state_;
            next.params.lambda_unobs.clear();
            next.alloc.clear();
            next.y_unobs.clear();
            const double after = log_complete_data_likelihood(data_, next) +
                                 log_prior(next.params, 0, priors_);
            const double log_qf = std::log(0.5);
            const double log_qr = 0.0 + genesis_lambda_logpdf(lam) + count_logpmf(y, lam);
            p.log_accept = after - before + log_qr - log_qf;
            return p;
        }
        CombineProposal p;
        p.left = static_cast<long>(rng_.uniform_below(static_cast<std::uint64_t>(r - 1)));
        return make_combine(p.left);
    }

    /// Deterministic combine of the adjacent unobserved pair (left, left+1);
    /// exposed so the reverse of a concrete split can be scored directly.
    std::optional<CombineProposal> make_combine(long left) {
        const long r = state_.r_unobs();
        if (left < 0 || left + 1 >= r) return std::nullopt;
        CombineProposal p;
        p.left = left;
        const auto cu = state_.c_unobs();
        const long c1 = cu[static_cast<std::size_t>(left)];
        const long c2 = cu[static_cast<std::size_t>(left + 1)];
        const long c_star = c1 + c2;
        const double lp1 = trunc_poisson_mean(state_.params.lambda_unobs[static_cast<std::size_t>(left)]);
        const double lp2 = trunc_poisson_mean(state_.params.lambda_unobs[static_cast<std::size_t>(left + 1)]);
        const double a = static_cast<double>(c1) / static_cast<double>(c_star);
        const double lp_star = a * lp1 + (1.0 - a) * lp2;
        p.lambda_star = inv_trunc_poisson_mean(lp_star, 1e-13);

        const double before = log_likelihood_current() +
                              log_prior(state_.params, r, priors_);
        AugmentedState next = combine_state(p);
        const double after = log_complete_data_likelihood(data_, next) +
                             log_prior(next.params, r - 1, priors_);

        long eligible_after = 0;
        {
            const auto cu2 = next.c_unobs();
            for (long c : cu2) eligible_after += c >= 2 ? 1 : 0;
        }
        const double log_jac = std::log(trunc_poisson_mean_deriv(p.lambda_star)) +
                               std::log(lp_star) - std::log1p(-a) -
                               std::log(trunc_poisson_mean_deriv(
                                   state_.params.lambda_unobs[static_cast<std::size_t>(left)])) -
                               std::log(trunc_poisson_mean_deriv(
                                   state_.params.lambda_unobs[static_cast<std::size_t>(left + 1)]));
        const double p_up_after = (r - 1 == 0) ? 1.0 : 0.5;  // r >= 2 here, so 0.5
        const double log_qf = std::log(0.5) - std::log(static_cast<double>(r - 1));
        const double log_qr = std::log(p_up_after) - std::log(static_cast<double>(eligible_after)) +
                              log_cell_split_pmf(c1, c_star) - lchoose(c_star, c1);
        p.log_accept = after - before + log_qr - log_qf - log_jac;
        return p;
    }

    void apply_combine(const CombineProposal& p) {
        if (p.genesis_death) {
            state_.params.lambda_unobs.clear();
            state_.alloc.clear();
            state_.y_unobs.clear();
            return;
        }
        state_ = combine_state(p);
    }

    std::map<std::string, MoveStats>& move_stats() { return moves_; }

private:
    template <class Apply>
    void accept(const char* name, double log_ratio, Apply&& apply) {
        auto& mv = moves_[name];
        ++mv.proposed;
        if (std::log(rng_.uniform_pos()) < log_ratio) {
            apply();
            ++mv.accepted;
        }
    }

    double log_likelihood_current() const {
        return log_complete_data_likelihood(data_, state_);
    }

    std::size_t sample_log_weights(const std::vector<double>& lw) {
        double m = kNegInf;
        for (double w : lw) m = std::max(m, w);
        double total = 0.0;
        for (double w : lw) total += std::exp(w - m);
        const double target = rng_.uniform_pos() * total;
        double cum = 0.0;
        for (std::size_t i = 0; i < lw.size(); ++i) {
            cum += std::exp(lw[i] - m);
            if (cum >= target) return i;
        }
        return lw.size() - 1;
    }

    /// Proposal log-density of a state's unobserved block under the block
    /// regeneration scheme, at that state's (alpha, beta, nu).
    double block_log_q(const AugmentedState& st) const {
        const long x_lo = std::max(data_.x_s, 1L);
        long x_hi = std::min(data_.n_cells, cfg_.caps.x_max);
        const long r_room = cfg_.caps.r_max - data_.r_s();
        if (r_room <= 0) x_hi = std::min(x_hi, data_.x_s);
        const long x = data_.x_s + st.x_unobs();
        double norm_x = kNegInf;
        for (long k = x_lo; k <= x_hi; ++k)
            norm_x = log_add_exp(norm_x, trunc_binomial_logpmf(k, data_.n_cells, st.params.alpha));
        double lq = trunc_binomial_logpmf(x, data_.n_cells, st.params.alpha) - norm_x;
        const long xu = st.x_unobs();
        const long ru = st.r_unobs();
        if (xu > 0) {
            const long r_top = data_.r_s() + std::min(xu, r_room);
            double norm_r = kNegInf;
            for (long r = data_.r_s() + 1; r <= r_top; ++r)
                norm_r = log_add_exp(norm_r, trunc_binomial_logpmf(r, x, st.params.beta));
            lq += trunc_binomial_logpmf(data_.r_s() + ru, x, st.params.beta) - norm_r;
            const auto cu = st.c_unobs();
            lq += log_multinomial_factor(cu, xu, ru);
            lq += log_factorial(ru);
            for (double l : st.params.lambda_unobs)
                lq += gamma_logpdf(l, {priors_.ind().d, st.params.nu});
            lq += log_alloc_factor(cu, xu);
            for (std::size_t i = 0; i < st.alloc.size(); ++i)
                lq += count_logpmf(st.y_unobs[i],
                                   st.params.lambda_unobs[static_cast<std::size_t>(st.alloc[i])]);
        }
        return lq;
    }

    long draw_count(double lambda) {
        if (cfg_.caps.unbounded_y()) return trunc_poisson_sample({lambda}, rng_);
        return trunc_poisson_sample_capped({lambda}, cfg_.caps.y_max, rng_);
    }

    double count_logpmf(long y, double lambda) const {
        double lp = trunc_poisson_logpmf(y, {lambda});
        if (!cfg_.caps.unbounded_y())
            lp -= trunc_poisson_log_mass_below({lambda}, cfg_.caps.y_max);
        return lp;
    }

    /// Proposal density for the rate of a genesis birth. Under the independent
    /// prior this is the prior itself, so the two cancel in the ratio.
    double genesis_lambda_logpdf(double lambda) const {
        if (priors_.independent())
            return gamma_logpdf(lambda, {priors_.ind().d, state_.params.nu});
        return gamma_logpdf(lambda, genesis_proposal_);
    }

    double genesis_lambda_sample() {
        if (priors_.independent())
            return gamma_sample({priors_.ind().d, state_.params.nu}, rng_);
        return gamma_sample(genesis_proposal_, rng_);
    }

    std::optional<SplitProposal> propose_genesis_birth() {
        const long x = data_.x_s;
        if (x + 1 > std::min(data_.n_cells, cfg_.caps.x_max)) return std::nullopt;
        if (data_.r_s() + 1 > cfg_.caps.r_max) return std::nullopt;
        SplitProposal p;
        p.genesis = true;
        p.lambda1 = genesis_lambda_sample();
        if (!(p.lambda1 > 0.0) || !std::isfinite(p.lambda1)) return std::nullopt;
        p.genesis_y = draw_count(p.lambda1);
        const double before = log_likelihood_current() +
                              log_prior(state_.params, 0, priors_);
        AugmentedState next = state_;
        next.params.lambda_unobs = {p.lambda1};
        next.alloc = {0};
        next.y_unobs = {p.genesis_y};
        const double after = log_complete_data_likelihood(data_, next) +
                             log_prior(next.params, 1, priors_);
        const double log_qf = 0.0 + genesis_lambda_logpdf(p.lambda1) +
                              count_logpmf(p.genesis_y, p.lambda1);
        const double log_qr = std::log(0.5);  // the reverse genesis death is forced
        p.log_accept = after - before + log_qr - log_qf;
        return p;
    }

    static std::optional<SplitProposal> with_rejected(SplitProposal p) {
        p.log_accept = kNegInf;
        return p;
    }

    AugmentedState split_state(const SplitProposal& p) const {
        AugmentedState next = state_;
        auto& lam = next.params.lambda_unobs;
        lam[static_cast<std::size_t>(p.target)] = p.lambda1;
        lam.insert(lam.begin() + p.target + 1, p.lambda2);
        std::vector<char> first(state_.alloc.size(), 0);
        for (std::size_t i : p.to_first) first[i] = 1;
        for (std::size_t i = 0; i < next.alloc.size(); ++i) {
            if (next.alloc[i] > p.target) {
                next.alloc[i] += 1;
            } else if (next.alloc[i] == p.target && !first[i]) {
                next.alloc[i] = p.target + 1;
            }
        }
        return next;
    }

    AugmentedState combine_state(const CombineProposal& p) const {
        AugmentedState next = state_;
        auto& lam = next.params.lambda_unobs;
        lam[static_cast<std::size_t>(p.left)] = p.lambda_star;
        lam.erase(lam.begin() + p.left + 1);
        for (auto& a : next.alloc)
            if (a > p.left) a -= 1;
        return next;
    }

    void update_one_lambda(double& lambda, long c, long sum_y, long unobs_index) {
        auto& mv = moves_["lambda"];
        ++mv.proposed;
        double prop;
        if (priors_.independent()) {
            prop = gamma_sample({priors_.ind().d + static_cast<double>(sum_y),
                                 state_.params.nu + static_cast<double>(c)}, rng_);
        } else {
            prop = gamma_sample({1.0 + static_cast<double>(sum_y), static_cast<double>(c)}, rng_);
        }
        if (!(prop > 0.0) || !std::isfinite(prop)) return;
        if (unobs_index >= 0) {
            // keep the unobserved rates strictly ordered
            const auto& lu = state_.params.lambda_unobs;
            if (unobs_index > 0 && prop <= lu[static_cast<std::size_t>(unobs_index - 1)]) return;
            if (unobs_index + 1 < static_cast<long>(lu.size()) &&
                prop >= lu[static_cast<std::size_t>(unobs_index + 1)])
                return;
        }
        // conjugate parts cancel, leaving the truncation-normalizer ratio
        double la = static_cast<double>(c) * (log1mexp(lambda) - log1mexp(prop));
        if (!priors_.independent()) {
            // the chain prior couples the rate to its ordered neighbours
            const long r = state_.r_unobs();
            const double before = log_prior(state_.params, r, priors_);
            const double saved = lambda;
            lambda = prop;
            const double after = log_prior(state_.params, r, priors_);
            lambda = saved;
            la += after - before;
        }
        if (std::log(rng_.uniform_pos()) < la) {
            lambda = prop;
            ++mv.accepted;
        }
    }

    void propose_cell_birth() {
        auto& mv = moves_["cell_birth"];
        const long r = state_.r_unobs();
        const long x = data_.x_s + state_.x_unobs();
        if (r == 0 || x + 1 > std::min(data_.n_cells, cfg_.caps.x_max)) return;
        ++mv.proposed;
        const long j = static_cast<long>(rng_.uniform_below(static_cast<std::uint64_t>(r)));
        const double lam = state_.params.lambda_unobs[static_cast<std::size_t>(j)];
        const long y = draw_count(lam);
        const std::size_t pos = rng_.uniform_below(state_.alloc.size() + 1);
        const double before = log_likelihood_current();
        state_.alloc.insert(state_.alloc.begin() + static_cast<std::ptrdiff_t>(pos), j);
        state_.y_unobs.insert(state_.y_unobs.begin() + static_cast<std::ptrdiff_t>(pos), y);
        const auto cu = state_.c_unobs();
        double eligible_after = 0.0;
        for (long a : state_.alloc)
            if (cu[static_cast<std::size_t>(a)] >= 2) eligible_after += 1.0;
        // q_f = 1/2 * (1/r) * pmf(y) * 1/(x_unobs+1); q_r = 1/2 * 1/eligible
        const double la = log_likelihood_current() - before - std::log(eligible_after) +
                          std::log(static_cast<double>(r)) - count_logpmf(y, lam) +
                          std::log(static_cast<double>(state_.alloc.size()));
        if (std::log(rng_.uniform_pos()) < la) {
            ++mv.accepted;
        } else {
            state_.alloc.erase(state_.alloc.begin() + static_cast<std::ptrdiff_t>(pos));
            state_.y_unobs.erase(state_.y_unobs.begin() + static_cast<std::ptrdiff_t>(pos));
        }
    }

    void propose_cell_death() {
        auto& mv = moves_["cell_death"];
        const long r = state_.r_unobs();
        if (r == 0) return;
        const auto cu = state_.c_unobs();
        std::vector<std::size_t> eligible;
        for (std::size_t i = 0; i < state_.alloc.size(); ++i)
            if (cu[static_cast<std::size_t>(state_.alloc[i])] >= 2) eligible.push_back(i);
        if (eligible.empty()) return;
        ++mv.proposed;
        const std::size_t cell = eligible[rng_.uniform_below(eligible.size())];
        const long j = state_.alloc[cell];
        const long y = state_.y_unobs[cell];
        const double lam = state_.params.lambda_unobs[static_cast<std::size_t>(j)];
        const double before = log_likelihood_current();
        AugmentedState next = state_;
        next.alloc.erase(next.alloc.begin() + static_cast<std::ptrdiff_t>(cell));
        next.y_unobs.erase(next.y_unobs.begin() + static_cast<std::ptrdiff_t>(cell));
        const double after = log_complete_data_likelihood(data_, next);
        // q_f = 1/2 * 1/eligible; q_r = 1/2 * (1/r) * pmf(y) * 1/x_unobs_old
        const double la = after - before + std::log(static_cast<double>(eligible.size())) -
                          std::log(static_cast<double>(r)) + count_logpmf(y, lam) -
                          std::log(static_cast<double>(state_.alloc.size()));
        if (std::log(rng_.uniform_pos()) < la) {
            state_ = std::move(next);
            ++mv.accepted;
        }
    }

    double log_cell_split_pmf(long c1, long c_star) const {
        // c1 = clamp(round(u1 * c_star), 1, c_star - 1) with u1 ~ Beta(2,2);
        // the Beta(2,2) cdf is the cubic 3x^2 - 2x^3
        if (c_star == 2) return 0.0;
        const auto cdf = [](double x) {
            x = std::clamp(x, 0.0, 1.0);
            return x * x * (3.0 - 2.0 * x);
        };
        const double c = static_cast<double>(c_star);
        double p;
        if (c1 == 1) {
            p = cdf(1.5 / c);
        } else if (c1 == c_star - 1) {
            p = 1.0 - cdf((c - 1.5) / c);
        } else {
            p = cdf((static_cast<double>(c1) + 0.5) / c) - cdf((static_cast<double>(c1) - 0.5) / c);
        }
        return std::log(p);
    }

    void init_state() {
        state_.params.alpha = priors_.alpha_prior.a / (priors_.alpha_prior.a + priors_.alpha_prior.b);
        state_.params.beta = priors_.beta_prior.a / (priors_.beta_prior.a + priors_.beta_prior.b);

        double d = 1.1, e = 2.0, f = 2.0;
        if (priors_.independent()) {
            d = priors_.ind().d;
            e = priors_.ind().nu_hyper.shape;
            f = priors_.ind().nu_hyper.rate;
        }
        state_.params.nu = e / f;

        double midrange = d * f / e;  // prior-implied mean when nothing observed
        long y_min = 0, y_max = 0;
        for (const auto& oc : data_.comps)
            for (long y : oc.y) {
                y_min = y_min == 0 ? y : std::min(y_min, y);
                y_max = std::max(y_max, y);
            }
        if (y_max > 0) midrange = 0.5 * static_cast<double>(y_min + y_max);
        if (!cfg_.caps.unbounded_y())
            midrange = std::min(midrange, static_cast<double>(cfg_.caps.y_max));
        // slight spread so the chain prior never starts on a tie
        state_.params.lambda_obs.resize(static_cast<std::size_t>(data_.r_s()));
        for (std::size_t j = 0; j < state_.params.lambda_obs.size(); ++j)
            state_.params.lambda_obs[j] = midrange * (1.0 + 0.01 * static_cast<double>(j));

        genesis_proposal_ = {2.0, 2.0 / std::max(midrange, 1e-6)};

        const double ex = trunc_binomial_mean(data_.n_cells, state_.params.alpha);
        long target = std::lround(ex) - data_.x_s;
        if (data_.r_s() == 0) target = std::max(1L, target);
        target = std::clamp(target, 0L, std::min(data_.n_cells, cfg_.caps.x_max) - data_.x_s);
        const long floor_cells = data_.r_s() == 0 ? 1 : 0;
        // prefer the prior-guided size, falling back until the start is possible
        std::vector<long> candidates{target};
        for (long t = floor_cells; t <= target; ++t) candidates.push_back(t);
        for (long t : candidates) {
            set_single_component_state(t, midrange);
            if (std::isfinite(log_likelihood_current())) break;
        }
        validate_state(data_, state_);
    }

    void set_single_component_state(long n_cells, double rate) {
        state_.params.lambda_unobs.clear();
        state_.alloc.clear();
        state_.y_unobs.clear();
        if (n_cells > 0 && data_.r_s() + 1 <= cfg_.caps.r_max) {
            state_.params.lambda_unobs = {rate};
            state_.alloc.assign(static_cast<std::size_t>(n_cells), 0);
            state_.y_unobs.resize(static_cast<std::size_t>(n_cells));
            for (auto& y : state_.y_unobs) y = draw_count(rate);
        }
    }

    ChainDraw record(long it) const {
        ChainDraw d;
        d.iter = it;
        d.alpha = state_.params.alpha;
        d.beta = state_.params.beta;
        d.nu = priors_.independent() ? state_.params.nu : 0.0;
        d.x_unobs = state_.x_unobs();
        d.r_unobs = state_.r_unobs();
        d.total = state_.total(data_);
        for (std::size_t j = 0; j < state_.params.lambda_obs.size(); ++j)
            d.components.push_back({static_cast<long>(j), true, state_.params.lambda_obs[j]});
        for (std::size_t j = 0; j < state_.params.lambda_unobs.size(); ++j)
            d.components.push_back({data_.r_s() + static_cast<long>(j), false,
                                    state_.params.lambda_unobs[j]});
        return d;
    }

    ObservedData data_;
    PriorConfig priors_;
    McmcConfig cfg_;
    RandomSource rng_;
    AugmentedState state_;
    GammaParam genesis_proposal_{2.0, 0.5};
    std::map<std::string, MoveStats> moves_;
};

inline Chain fit_mixture(const AdaptiveSample& sample, const PriorConfig& priors,
                         const McmcConfig& cfg) {
    MixtureSampler sampler(ObservedData::from_sample(sample), priors, cfg);
    return sampler.run();
}

}  // namespace rarepop
