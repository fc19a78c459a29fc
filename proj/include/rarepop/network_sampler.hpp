#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "rarepop/model.hpp"
#include "rarepop/rng.hpp"
#include "rarepop/sampler.hpp"

// Fixed-dimension MCMC for the network-level baseline: a single shared rate,
// whole-network birth/death and grow/shrink moves on the unobserved side, and
// Gibbs imputation of the unobserved network totals.

namespace rarepop {

class NetworkSampler {
public:
    NetworkSampler(ObservedData data, PriorConfig priors, McmcConfig cfg)
        : data_(std::move(data)), priors_(std::move(priors)), cfg_(cfg), rng_(cfg.seed, 0) {
        cfg_.validate();
        if (data_.recorded_draws < 1)
            throw std::domain_error("fit: the sample must contain at least one network");
        if (!priors_.independent())
            throw std::domain_error("network model: only the independent lambda prior is defined");
        init_state();
    }

    const ObservedData& data() const { return data_; }
    NetworkModelState& state() { return state_; }
    RandomSource& rng() { return rng_; }

    Chain run() {
        Chain chain;
        chain.config = cfg_;
        for (long it = 1; it <= cfg_.iterations; ++it) {
            sweep();
            if (it > cfg_.burn_in && (it - cfg_.burn_in) % cfg_.thin == 0) {
                if (cfg_.check_invariants) validate_network_state(data_, state_);
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
        update_totals();
        grow_shrink();
        birth_death();
    }

    void update_alpha() {
        const long x = data_.x_s + state_.x_unobs();
        const long n = data_.n_cells;
        const auto& pr = priors_.alpha_prior;
        const double prop = beta_sample({pr.a + static_cast<double>(x),
                                         pr.b + static_cast<double>(n - x)}, rng_);
        const double la = log1mexp(-static_cast<double>(n) * std::log1p(-state_.alpha)) -
                          log1mexp(-static_cast<double>(n) * std::log1p(-prop));
        accept("alpha", la, [&] { state_.alpha = prop; });
    }

    void update_beta() {
        const long x = data_.x_s + state_.x_unobs();
        const long r = data_.r_s() + state_.r_unobs();
        const auto& pr = priors_.beta_prior;
        const double prop = beta_sample({pr.a + static_cast<double>(r),
                                         pr.b + static_cast<double>(x - r)}, rng_);
        const double la = log1mexp(-static_cast<double>(x) * std::log1p(-state_.beta)) -
                          log1mexp(-static_cast<double>(x) * std::log1p(-prop));
        accept("beta", la, [&] { state_.beta = prop; });
    }

    void update_nu() {
        const auto& ip = priors_.ind();
        state_.nu = gamma_sample({ip.nu_hyper.shape + ip.d, ip.nu_hyper.rate + state_.lambda}, rng_);
    }

    /// MH on the shared rate: the conjugate Gamma proposal absorbs every
    /// untruncated Poisson term, leaving the truncation-normalizer ratio.
    void update_lambda() {
        long sum_y = data_.sum_y_s;
        long sum_c = data_.x_s;
        for (long y : state_.ytot_unobs) sum_y += y;
        for (long c : state_.c_unobs) sum_c += c;
        const double prop = gamma_sample({priors_.ind().d + static_cast<double>(sum_y),
                                          state_.nu + static_cast<double>(sum_c)}, rng_);
        if (!(prop > 0.0) || !std::isfinite(prop)) return;
        double la = 0.0;
        auto add = [&](long c) {
            la += log1mexp(state_.lambda * static_cast<double>(c)) -
                  log1mexp(prop * static_cast<double>(c));
        };
        for (const auto& oc : data_.comps) add(oc.c);
        for (long c : state_.c_unobs) add(c);
        accept("lambda", la, [&] { state_.lambda = prop; });
    }

    void update_totals() {
        for (std::size_t j = 0; j < state_.c_unobs.size(); ++j) {
            const double rate = state_.lambda * static_cast<double>(state_.c_unobs[j]);
            state_.ytot_unobs[j] = draw_count(rate);
        }
    }

    /// Symmetric +-1 move on one unobserved network's cell count.
    void grow_shrink() {
        auto& mv = moves_["grow_shrink"];
        const long r = state_.r_unobs();
        if (r == 0) return;
        const std::size_t j = rng_.uniform_below(static_cast<std::uint64_t>(r));
        const bool grow = rng_.uniform() < 0.5;
        const long x = data_.x_s + state_.x_unobs();
        if (grow && x + 1 > std::min(data_.n_cells, cfg_.caps.x_max)) return;
        if (!grow && state_.c_unobs[j] < 2) return;
        ++mv.proposed;
        const double before = network_model_log_likelihood(data_, state_);
        state_.c_unobs[j] += grow ? 1 : -1;
        const double la = network_model_log_likelihood(data_, state_) - before;
        if (std::log(rng_.uniform_pos()) < la) {
            ++mv.accepted;
        } else {
            state_.c_unobs[j] -= grow ? 1 : -1;
        }
    }

    /// Birth/death of whole single-cell unobserved networks.
    void birth_death() {
        if (rng_.uniform() < 0.5) {
            auto& mv = moves_["birth"];
            const long x = data_.x_s + state_.x_unobs();
            if (x + 1 > std::min(data_.n_cells, cfg_.caps.x_max)) return;
            if (data_.r_s() + state_.r_unobs() + 1 > cfg_.caps.r_max) return;
            ++mv.proposed;
            const long y = draw_count(state_.lambda);
            const std::size_t pos = rng_.uniform_below(state_.c_unobs.size() + 1);
            const double before = network_model_log_likelihood(data_, state_);
            state_.c_unobs.insert(state_.c_unobs.begin() + static_cast<std::ptrdiff_t>(pos), 1);
            state_.ytot_unobs.insert(state_.ytot_unobs.begin() + static_cast<std::ptrdiff_t>(pos), y);
            // insert position and removal index choices cancel
            const double la = network_model_log_likelihood(data_, state_) - before -
                              count_logpmf(y, state_.lambda);
            if (std::log(rng_.uniform_pos()) < la) {
                ++mv.accepted;
            } else {
                state_.c_unobs.erase(state_.c_unobs.begin() + static_cast<std::ptrdiff_t>(pos));
                state_.ytot_unobs.erase(state_.ytot_unobs.begin() + static_cast<std::ptrdiff_t>(pos));
            }
        } else {
            auto& mv = moves_["death"];
            const long r = state_.r_unobs();
            if (r == 0) return;
            const std::size_t j = rng_.uniform_below(static_cast<std::uint64_t>(r));
            if (state_.c_unobs[j] != 1) return;  // only singleton networks can die
            ++mv.proposed;
            const long y = state_.ytot_unobs[j];
            const double before = network_model_log_likelihood(data_, state_);
            NetworkModelState next = state_;
            next.c_unobs.erase(next.c_unobs.begin() + static_cast<std::ptrdiff_t>(j));
            next.ytot_unobs.erase(next.ytot_unobs.begin() + static_cast<std::ptrdiff_t>(j));
            const double la = network_model_log_likelihood(data_, next) - before +
                              count_logpmf(y, state_.lambda);
            if (std::log(rng_.uniform_pos()) < la) {
                state_ = std::move(next);
                ++mv.accepted;
            }
        }
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

    long draw_count(double rate) {
        if (cfg_.caps.unbounded_y()) return trunc_poisson_sample({rate}, rng_);
        return trunc_poisson_sample_capped({rate}, cfg_.caps.y_max, rng_);
    }

    double count_logpmf(long y, double rate) const {
        double lp = trunc_poisson_logpmf(y, {rate});
        if (!cfg_.caps.unbounded_y())
            lp -= trunc_poisson_log_mass_below({rate}, cfg_.caps.y_max);
        return lp;
    }

    void init_state() {
        state_.alpha = priors_.alpha_prior.a / (priors_.alpha_prior.a + priors_.alpha_prior.b);
        state_.beta = priors_.beta_prior.a / (priors_.beta_prior.a + priors_.beta_prior.b);
        const auto& ip = priors_.ind();
        state_.nu = ip.nu_hyper.shape / ip.nu_hyper.rate;
        double midrange = ip.d / state_.nu;
        long y_min = 0, y_max = 0;
        for (const auto& oc : data_.comps)
            for (long y : oc.y) {
                y_min = y_min == 0 ? y : std::min(y_min, y);
                y_max = std::max(y_max, y);
            }
        if (y_max > 0) midrange = 0.5 * static_cast<double>(y_min + y_max);
        state_.lambda = midrange;

        const double ex = trunc_binomial_mean(data_.n_cells, state_.alpha);
        long target = std::lround(ex) - data_.x_s;
        if (data_.r_s() == 0) target = std::max(1L, target);
        target = std::clamp(target, 0L, std::min(data_.n_cells, cfg_.caps.x_max) - data_.x_s);
        const long floor_cells = data_.r_s() == 0 ? 1 : 0;
        std::vector<long> candidates{target};
        for (long t = floor_cells; t <= target; ++t) candidates.push_back(t);
        for (long t : candidates) {
            state_.c_unobs.clear();
            state_.ytot_unobs.clear();
            if (t > 0 && data_.r_s() + 1 <= cfg_.caps.r_max) {
                state_.c_unobs = {t};
                state_.ytot_unobs = {draw_count(state_.lambda * static_cast<double>(t))};
            }
            if (std::isfinite(network_model_log_likelihood(data_, state_))) break;
        }
        validate_network_state(data_, state_);
    }

    ChainDraw record(long it) const {
        ChainDraw d;
        d.iter = it;
        d.alpha = state_.alpha;
        d.beta = state_.beta;
        d.nu = state_.nu;
        d.x_unobs = state_.x_unobs();
        d.r_unobs = state_.r_unobs();
        d.total = state_.total(data_);
        d.components.push_back({0, false, state_.lambda});
        return d;
    }

    ObservedData data_;
    PriorConfig priors_;
    McmcConfig cfg_;
    RandomSource rng_;
    NetworkModelState state_;
    std::map<std::string, MoveStats> moves_;
};

inline Chain fit_network_model(const AdaptiveSample& sample, const PriorConfig& priors,
                               const McmcConfig& cfg) {
    NetworkSampler sampler(ObservedData::from_sample(sample), priors, cfg);
    return sampler.run();
}

}  // namespace rarepop
