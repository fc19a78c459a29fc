#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "rarepop/chain_io.hpp"
#include "rarepop/config.hpp"
#include "rarepop/diagnose.hpp"
#include "rarepop/network_sampler.hpp"
#include "rarepop/sampler.hpp"

// Experiment drivers behind the CLI: replication studies, the mixture-vs-
// network comparison, the prior sensitivity study, and the single-population
// replication with convergence diagnostics. Every driver is a pure function
// of (config, input files, seed); replications fan out over worker threads
// with one RNG stream per replication and order-independent aggregation.

namespace rarepop {

namespace detail {

template <class F>
void parallel_for(long n, int jobs, F&& body) {
    if (jobs <= 1) {
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> workers;
    const int count = static_cast<int>(std::min<long>(jobs, n));
    workers.reserve(static_cast<std::size_t>(count));
    for (int w = 0; w < count; ++w)
        workers.emplace_back([&] {
            for (;;) {
                const long i = next.fetch_add(1);
                if (i >= n) return;
                body(i);
            }
        });
    for (auto& w : workers) w.join();
}

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream) {
    return RandomSource(seed, stream).next_u64();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Chain series extraction
// ---------------------------------------------------------------------------

struct SeriesSet {
    // scalar parameter name -> draws; component series keyed "lambda_<label>"
    std::vector<std::pair<std::string, std::vector<double>>> series;

    static SeriesSet from_chain(const Chain& chain) {
        SeriesSet s;
        std::vector<double> alpha, beta, nu, total;
        std::vector<long> r_total;
        for (const auto& d : chain.draws) {
            alpha.push_back(d.alpha);
            beta.push_back(d.beta);
            nu.push_back(d.nu);
            total.push_back(static_cast<double>(d.total));
            r_total.push_back(static_cast<long>(d.components.size()));
        }
        s.series.emplace_back("alpha", std::move(alpha));
        s.series.emplace_back("beta", std::move(beta));
        s.series.emplace_back("nu", std::move(nu));
        s.series.emplace_back("T", std::move(total));
        append_components(s, r_total, [&](std::size_t draw, std::size_t pos) {
            return chain.draws[draw].components[pos].lambda;
        });
        return s;
    }

    static SeriesSet from_files(const LoadedChain& chain, const LoadedComponents& comps) {
        SeriesSet s;
        s.series.emplace_back("alpha", chain.alpha);
        s.series.emplace_back("beta", chain.beta);
        s.series.emplace_back("nu", chain.nu);
        s.series.emplace_back("T", chain.total);
        // group component rows by draw, preserving file order within a draw
        std::vector<std::vector<double>> per_draw(chain.size());
        std::map<long, std::size_t> iter_index;
        for (std::size_t i = 0; i < chain.size(); ++i) iter_index[chain.iter[i]] = i;
        std::vector<long> r_total(chain.size(), 0);
        for (std::size_t k = 0; k < comps.iter.size(); ++k) {
            const auto it = iter_index.find(comps.iter[k]);
            if (it == iter_index.end())
                throw std::runtime_error("components file refers to an iteration absent from the chain");
            per_draw[it->second].push_back(comps.lambda[k]);
            r_total[it->second] += 1;
        }
        append_components(s, r_total, [&](std::size_t draw, std::size_t pos) {
            return per_draw[draw][pos];
        });
        return s;
    }

private:
    template <class Get>
    static void append_components(SeriesSet& s, const std::vector<long>& r_total, Get&& get) {
        if (r_total.empty()) return;
        // condition on the modal total number of components, then pair
        // positions across draws (observed labels are stable; unobserved
        // positions are rank-matched)
        std::map<long, long> freq;
        for (long r : r_total) ++freq[r];
        long modal = 0, best = -1;
        for (const auto& [r, n] : freq)
            if (n > best) {
                best = n;
                modal = r;
            }
        if (modal == 0) return;
        std::vector<std::vector<double>> lam(static_cast<std::size_t>(modal));
        for (std::size_t i = 0; i < r_total.size(); ++i) {
            if (r_total[i] != modal) continue;
            for (long p = 0; p < modal; ++p)
                lam[static_cast<std::size_t>(p)].push_back(get(i, static_cast<std::size_t>(p)));
        }
        for (long p = 0; p < modal; ++p)
            s.series.emplace_back("lambda_" + std::to_string(p + 1),
                                  std::move(lam[static_cast<std::size_t>(p)]));
    }
};

struct ParameterDiagnostics {
    double geweke = 0.0;
    long rl_nmin = 0;
    double rl_factor = 0.0;
    bool degenerate = false;  // constant series, nothing to diagnose
};

inline std::map<std::string, ParameterDiagnostics> diagnose_series(const SeriesSet& set) {
    std::map<std::string, ParameterDiagnostics> out;
    for (const auto& [name, xs] : set.series) {
        ParameterDiagnostics d;
        const bool constant =
            std::all_of(xs.begin(), xs.end(), [&](double v) { return v == xs.front(); });
        if (xs.empty() || constant) {
            d.degenerate = true;
        } else {
            d.geweke = geweke_z(xs);
            const auto rl = raftery_lewis(xs);
            d.rl_nmin = rl.n_min;
            d.rl_factor = rl.dependence_factor;
        }
        out[name] = d;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Single-fit metric extraction
// ---------------------------------------------------------------------------

struct FitRecords {
    ReplicationRecord t;
    std::optional<ReplicationRecord> alpha, beta, nu;
    std::vector<std::pair<long, ReplicationRecord>> lambda_obs;    // population label
    std::vector<std::pair<long, ReplicationRecord>> lambda_unobs;  // population label
    long skipped_unobs = 0;  // components without enough conditional draws
};

/// Pull per-parameter truth/estimate/interval records out of one fitted chain.
/// Unobserved rates are rank-matched on the draws whose unobserved component
/// count equals the true one.
inline FitRecords extract_fit_records(const Chain& chain, const GeneratedPopulation& gen,
                                      const AdaptiveSample& sample, double alpha_truth,
                                      double beta_truth, std::optional<double> nu_truth) {
    FitRecords rec;
    std::vector<double> t, alpha, beta, nu;
    for (const auto& d : chain.draws) {
        t.push_back(static_cast<double>(d.total));
        alpha.push_back(d.alpha);
        beta.push_back(d.beta);
        nu.push_back(d.nu);
    }
    const double truth_t = static_cast<double>(population_total(gen.pop));
    rec.t = {truth_t, detail::mean_of(t), hpd(t, 0.95)};
    rec.alpha = ReplicationRecord{alpha_truth, detail::mean_of(alpha), hpd(alpha, 0.95)};
    rec.beta = ReplicationRecord{beta_truth, detail::mean_of(beta), hpd(beta, 0.95)};
    if (nu_truth) rec.nu = ReplicationRecord{*nu_truth, detail::mean_of(nu), hpd(nu, 0.95)};

    // Observed components pair by identity: the sampled network is known, and
    // its chain label is stable. Generation labels are ascending-rate, so a
    // network's label is also its rank in the true rate vector.
    const long r_true = gen.net.r_networks;
    std::vector<char> rank_observed(static_cast<std::size_t>(r_true), 0);
    std::vector<long> obs_labels;
    for (const auto& w : sample.networks)
        if (w.non_empty()) {
            rank_observed[static_cast<std::size_t>(w.label)] = 1;
            obs_labels.push_back(w.label);
        }
    for (std::size_t k = 0; k < obs_labels.size(); ++k) {
        std::vector<double> xs;
        xs.reserve(chain.draws.size());
        for (const auto& d : chain.draws) xs.push_back(d.components[k].lambda);
        const double truth = gen.lambda[static_cast<std::size_t>(obs_labels[k])];
        rec.lambda_obs.emplace_back(obs_labels[k],
                                    ReplicationRecord{truth, detail::mean_of(xs), hpd(xs, 0.95)});
    }
    // Unobserved truths pair by rank over the full ordered vector, conditional
    // on the draws whose total component count matches the truth; observed
    // neighbours then bracket the unobserved ranks.
    std::vector<std::vector<double>> ranked(static_cast<std::size_t>(r_true));
    std::vector<double> sorted_draw;
    for (const auto& d : chain.draws) {
        if (static_cast<long>(d.components.size()) != r_true) continue;
        sorted_draw.clear();
        for (const auto& c : d.components) sorted_draw.push_back(c.lambda);
        std::sort(sorted_draw.begin(), sorted_draw.end());
        for (long q = 0; q < r_true; ++q)
            ranked[static_cast<std::size_t>(q)].push_back(sorted_draw[static_cast<std::size_t>(q)]);
    }
    for (long q = 0; q < r_true; ++q) {
        if (rank_observed[static_cast<std::size_t>(q)]) continue;
        auto& xs = ranked[static_cast<std::size_t>(q)];
        const double truth = gen.lambda[static_cast<std::size_t>(q)];
        if (xs.size() < 20) {
            ++rec.skipped_unobs;
            continue;
        }
        rec.lambda_unobs.emplace_back(q,
                                      ReplicationRecord{truth, detail::mean_of(xs), hpd(xs, 0.95)});
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Replication study (Table 2 / Table 3 layout)
// ---------------------------------------------------------------------------

struct ReplicateResult {
    std::map<std::string, ReplicationSummary> summary;  // T, alpha, beta, nu, lambda_s, lambda_unobs
    std::vector<FitRecords> reps;                       // successful replications
    std::vector<std::pair<long, std::string>> failures;
};

inline ReplicateResult run_replicate(const RunConfig& cfg) {
    std::vector<std::optional<FitRecords>> slots(static_cast<std::size_t>(cfg.replications));
    std::vector<std::string> errors(static_cast<std::size_t>(cfg.replications));
    const std::optional<double> nu_truth =
        std::holds_alternative<GammaParam>(cfg.population.lambda_gen) &&
                cfg.lambda_prior == "independent"
            ? std::optional<double>(std::get<GammaParam>(cfg.population.lambda_gen).rate)
            : std::nullopt;

    detail::parallel_for(cfg.replications, cfg.jobs, [&](long i) {
        try {
            RandomSource pop_rng(cfg.seed, 4 * static_cast<std::uint64_t>(i));
            const auto gen = generate_population(cfg.population, pop_rng);
            RandomSource s_rng(cfg.seed, 4 * static_cast<std::uint64_t>(i) + 1);
            const auto sample = adaptive_sample(gen.pop, gen.net, cfg.initial_fraction, s_rng);
            if (sample.r_s() == 0)
                throw std::runtime_error("sample observed no non-empty network");
            std::vector<long> ys;
            for (const auto& w : sample.networks)
                for (long y : w.counts)
                    if (y > 0) ys.push_back(y);
            McmcConfig mc = cfg.mcmc;
            mc.seed = detail::derived_seed(cfg.mcmc.seed, 4 * static_cast<std::uint64_t>(i) + 2);
            const auto chain = fit_mixture(sample, cfg.make_priors(ys), mc);
            slots[static_cast<std::size_t>(i)] = extract_fit_records(
                chain, gen, sample, cfg.population.alpha, cfg.population.beta, nu_truth);
        } catch (const std::exception& ex) {
            errors[static_cast<std::size_t>(i)] = ex.what();
        }
    });

    ReplicateResult out;
    std::vector<ReplicationRecord> t, a, b, n, ls, lu;
    for (long i = 0; i < cfg.replications; ++i) {
        if (!slots[static_cast<std::size_t>(i)]) {
            out.failures.emplace_back(i, errors[static_cast<std::size_t>(i)]);
            continue;
        }
        const auto& r = *slots[static_cast<std::size_t>(i)];
        t.push_back(r.t);
        if (r.alpha) a.push_back(*r.alpha);
        if (r.beta) b.push_back(*r.beta);
        if (r.nu) n.push_back(*r.nu);
        for (const auto& [lab, rr] : r.lambda_obs) ls.push_back(rr);
        for (const auto& [lab, rr] : r.lambda_unobs) lu.push_back(rr);
        out.reps.push_back(r);
    }
    if (t.size() >= 2) out.summary["T"] = summarize_replications(t, true);
    if (a.size() >= 2) out.summary["alpha"] = summarize_replications(a, false);
    if (b.size() >= 2) out.summary["beta"] = summarize_replications(b, false);
    if (n.size() >= 2) out.summary["nu"] = summarize_replications(n, false);
    if (ls.size() >= 2) out.summary["lambda_s"] = summarize_replications(ls, true);
    if (lu.size() >= 2) out.summary["lambda_unobs"] = summarize_replications(lu, true);
    return out;
}

// ---------------------------------------------------------------------------
// Mixture vs network comparison (Tables 4 and 5, boxplot source data)
// ---------------------------------------------------------------------------

struct CompareOutcome {
    double truth_t = 0.0;
    ReplicationRecord mixture_t, network_t;
    std::optional<ReplicationRecord> mixture_alpha, network_alpha, mixture_beta, network_beta;
};

struct CompareResult {
    std::map<std::string, ReplicationSummary> summary;  // "<model>_<param>"
    std::optional<double> efficiency;                   // Var(mixture) / Var(network)
    std::vector<CompareOutcome> reps;
    std::vector<std::pair<long, std::string>> failures;
};

inline CompareResult run_compare(const RunConfig& cfg) {
    const bool design = cfg.compare_mode == "design";
    std::optional<GridPopulation> fixed_pop;
    std::optional<NetworkStructure> fixed_net;
    if (design) {
        if (cfg.population_file.empty() || cfg.rows < 1 || cfg.cols < 1)
            throw ConfigError("compare: design mode needs population_file, rows and cols");
        fixed_pop = ingest_grid(cfg.population_file, cfg.rows, cfg.cols);
        fixed_net = extract_networks(*fixed_pop);
    }

    std::vector<std::optional<CompareOutcome>> slots(static_cast<std::size_t>(cfg.replications));
    std::vector<std::string> errors(static_cast<std::size_t>(cfg.replications));
    detail::parallel_for(cfg.replications, cfg.jobs, [&](long i) {
        try {
            CompareOutcome oc;
            GridPopulation pop;
            NetworkStructure net;
            if (design) {
                pop = *fixed_pop;
                net = *fixed_net;
            } else {
                RandomSource pop_rng(cfg.seed, 6 * static_cast<std::uint64_t>(i));
                auto gen = generate_population(cfg.population, pop_rng);
                pop = std::move(gen.pop);
                net = std::move(gen.net);
            }
            oc.truth_t = static_cast<double>(population_total(pop));
            RandomSource s_rng(cfg.seed, 6 * static_cast<std::uint64_t>(i) + 1);
            const auto sample = adaptive_sample(pop, net, cfg.initial_fraction, s_rng);
            if (sample.r_s() == 0)
                throw std::runtime_error("sample observed no non-empty network");
            std::vector<long> ys;
            for (const auto& w : sample.networks)
                for (long y : w.counts)
                    if (y > 0) ys.push_back(y);
            const auto priors = cfg.make_priors(ys);

            McmcConfig mc = cfg.mcmc;
            mc.seed = detail::derived_seed(cfg.mcmc.seed, 6 * static_cast<std::uint64_t>(i) + 2);
            const auto mix = fit_mixture(sample, priors, mc);
            mc.seed = detail::derived_seed(cfg.mcmc.seed, 6 * static_cast<std::uint64_t>(i) + 3);
            const auto netc = fit_network_model(sample, priors, mc);

            const auto record = [&](const Chain& chain, ReplicationRecord& t_rec,
                                    std::optional<ReplicationRecord>& a_rec,
                                    std::optional<ReplicationRecord>& b_rec) {
                std::vector<double> t, a, b;
                for (const auto& d : chain.draws) {
                    t.push_back(static_cast<double>(d.total));
                    a.push_back(d.alpha);
                    b.push_back(d.beta);
                }
                t_rec = {oc.truth_t, detail::mean_of(t), hpd(t, 0.95)};
                if (!design) {
                    a_rec = ReplicationRecord{cfg.population.alpha, detail::mean_of(a), hpd(a, 0.95)};
                    b_rec = ReplicationRecord{cfg.population.beta, detail::mean_of(b), hpd(b, 0.95)};
                }
            };
            record(mix, oc.mixture_t, oc.mixture_alpha, oc.mixture_beta);
            record(netc, oc.network_t, oc.network_alpha, oc.network_beta);
            slots[static_cast<std::size_t>(i)] = std::move(oc);
        } catch (const std::exception& ex) {
            errors[static_cast<std::size_t>(i)] = ex.what();
        }
    });

    CompareResult out;
    std::vector<ReplicationRecord> mt, nt, ma, na, mb, nb;
    for (long i = 0; i < cfg.replications; ++i) {
        if (!slots[static_cast<std::size_t>(i)]) {
            out.failures.emplace_back(i, errors[static_cast<std::size_t>(i)]);
            continue;
        }
        const auto& r = *slots[static_cast<std::size_t>(i)];
        mt.push_back(r.mixture_t);
        nt.push_back(r.network_t);
        if (r.mixture_alpha) ma.push_back(*r.mixture_alpha);
        if (r.network_alpha) na.push_back(*r.network_alpha);
        if (r.mixture_beta) mb.push_back(*r.mixture_beta);
        if (r.network_beta) nb.push_back(*r.network_beta);
        out.reps.push_back(r);
    }
    if (mt.size() >= 2 && nt.size() >= 2) {
        std::vector<double> net_est;
        for (const auto& r : nt) net_est.push_back(r.estimate);
        const double net_var = sample_variance(net_est);
        out.summary["mixture_T"] = summarize_replications(mt, true, net_var);
        out.efficiency = out.summary["mixture_T"].efficiency;
        out.summary["network_T"] = summarize_replications(nt, true);
        if (ma.size() >= 2) out.summary["mixture_alpha"] = summarize_replications(ma, false);
        if (na.size() >= 2) out.summary["network_alpha"] = summarize_replications(na, false);
        if (mb.size() >= 2) out.summary["mixture_beta"] = summarize_replications(mb, false);
        if (nb.size() >= 2) out.summary["network_beta"] = summarize_replications(nb, false);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prior sensitivity study (Figures 6-8 source data)
// ---------------------------------------------------------------------------

struct PriorSensitivityResult {
    // (r_true, prior, component label 1-based, observed flag) -> pooled RMSE / count
    struct LambdaCell {
        double rmse = 0.0;
        long count = 0;
    };
    std::map<std::tuple<long, std::string, long, bool>, LambdaCell> lambda_rmse;
    // (r_true, prior) -> T summary
    std::map<std::pair<long, std::string>, ReplicationSummary> t_summary;
    // rows (r_true, prior, rep): posterior interval for the total network count R
    struct RInterval {
        long r_true = 0;
        std::string prior;
        long rep = 0;
        double lo = 0.0, median = 0.0, hi = 0.0;
    };
    std::vector<RInterval> r_intervals;
    std::vector<std::pair<long, std::string>> failures;
};

inline PriorSensitivityResult run_prior_sensitivity(const RunConfig& cfg) {
    PriorSensitivityResult out;
    std::vector<std::string> prior_names{"independent"};
    for (double tau : cfg.tau_grid) {
        std::ostringstream name;
        name << "tau=" << tau;
        prior_names.push_back(name.str());
    }

    long scenario_index = 0;
    for (const auto& truth : cfg.lambda_truths) {
        const long r_true = static_cast<long>(truth.size());
        std::map<std::string, std::vector<ReplicationRecord>> t_records;
        std::map<std::tuple<std::string, long, bool>, std::vector<double>> rel_errors;

        struct RepOut {
            std::map<std::string, ReplicationRecord> t;
            std::map<std::tuple<std::string, long, bool>, std::vector<double>> re;
            std::vector<PriorSensitivityResult::RInterval> intervals;
        };
        std::vector<std::optional<RepOut>> slots(static_cast<std::size_t>(cfg.replications));
        std::vector<std::string> errors(static_cast<std::size_t>(cfg.replications));

        detail::parallel_for(cfg.replications, cfg.jobs, [&](long i) {
            try {
                RepOut ro;
                PopulationSpec spec = cfg.population;
                spec.lambda_gen = truth;
                const std::uint64_t base =
                    1000003 * static_cast<std::uint64_t>(scenario_index) +
                    8 * static_cast<std::uint64_t>(i);
                RandomSource pop_rng(cfg.seed, base);
                const auto gen = generate_population(spec, pop_rng);
                RandomSource s_rng(cfg.seed, base + 1);
                const auto sample = adaptive_sample(gen.pop, gen.net, cfg.initial_fraction, s_rng);
                if (sample.r_s() == 0)
                    throw std::runtime_error("sample observed no non-empty network");
                std::vector<long> ys;
                for (const auto& w : sample.networks)
                    for (long y : w.counts)
                        if (y > 0) ys.push_back(y);

                for (std::size_t p = 0; p < prior_names.size(); ++p) {
                    RunConfig fit_cfg = cfg;
                    if (p == 0) {
                        fit_cfg.lambda_prior = "independent";
                    } else {
                        fit_cfg.lambda_prior = "dependent";
                        fit_cfg.tau = cfg.tau_grid[p - 1];
                    }
                    McmcConfig mc = cfg.mcmc;
                    mc.seed = detail::derived_seed(cfg.mcmc.seed, base + 2 + p);
                    const auto chain = fit_mixture(sample, fit_cfg.make_priors(ys), mc);
                    const auto rec = extract_fit_records(chain, gen, sample,
                                                         cfg.population.alpha,
                                                         cfg.population.beta, std::nullopt);
                    ro.t[prior_names[p]] = rec.t;
                    for (const auto& [lab, rr] : rec.lambda_obs)
                        ro.re[{prior_names[p], lab + 1, true}].push_back(
                            (rr.estimate - rr.truth) / rr.truth);
                    for (const auto& [lab, rr] : rec.lambda_unobs)
                        ro.re[{prior_names[p], lab + 1, false}].push_back(
                            (rr.estimate - rr.truth) / rr.truth);
                    std::vector<double> r_series;
                    for (const auto& d : chain.draws)
                        r_series.push_back(static_cast<double>(d.components.size()));
                    const auto ri = hpd(r_series, 0.95);
                    std::vector<double> sorted_r = r_series;
                    std::sort(sorted_r.begin(), sorted_r.end());
                    ro.intervals.push_back({r_true, prior_names[p], i, ri.lower,
                                            sorted_r[sorted_r.size() / 2], ri.upper});
                }
                slots[static_cast<std::size_t>(i)] = std::move(ro);
            } catch (const std::exception& ex) {
                errors[static_cast<std::size_t>(i)] = ex.what();
            }
        });

        for (long i = 0; i < cfg.replications; ++i) {
            if (!slots[static_cast<std::size_t>(i)]) {
                out.failures.emplace_back(i, errors[static_cast<std::size_t>(i)]);
                continue;
            }
            auto& ro = *slots[static_cast<std::size_t>(i)];
            for (auto& [prior, rec] : ro.t) t_records[prior].push_back(rec);
            for (auto& [key, res] : ro.re)
                for (double re : res) rel_errors[key].push_back(re);
            for (auto& ri : ro.intervals) out.r_intervals.push_back(ri);
        }

        for (const auto& [prior, recs] : t_records)
            if (recs.size() >= 2)
                out.t_summary[{r_true, prior}] = summarize_replications(recs, true);
        for (const auto& [key, res] : rel_errors) {
            double ss = 0.0;
            for (double re : res) ss += re * re;
            out.lambda_rmse[{r_true, std::get<0>(key), std::get<1>(key), std::get<2>(key)}] = {
                ss / static_cast<double>(res.size()), static_cast<long>(res.size())};
        }
        ++scenario_index;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Single-population replication with convergence diagnostics
// ---------------------------------------------------------------------------

struct SingleReplicationResult {
    long truth_t = 0;
    double post_mean_t = 0.0;
    HpdInterval t_interval;
    bool t_covered = false;
    std::map<std::string, ParameterDiagnostics> diagnostics;
    Chain chain;
};

inline SingleReplicationResult run_single_replication(const RunConfig& cfg) {
    RandomSource pop_rng(cfg.seed, 0);
    const auto gen = generate_population(cfg.population, pop_rng);
    RandomSource s_rng(cfg.seed, 1);
    const auto sample = adaptive_sample(gen.pop, gen.net, cfg.initial_fraction, s_rng);
    std::vector<long> ys;
    for (const auto& w : sample.networks)
        for (long y : w.counts)
            if (y > 0) ys.push_back(y);
    SingleReplicationResult res;
    res.chain = fit_mixture(sample, cfg.make_priors(ys), cfg.mcmc);
    res.truth_t = population_total(gen.pop);
    std::vector<double> t;
    for (const auto& d : res.chain.draws) t.push_back(static_cast<double>(d.total));
    res.post_mean_t = detail::mean_of(t);
    res.t_interval = hpd(t, 0.95);
    res.t_covered = res.t_interval.contains(static_cast<double>(res.truth_t));
    res.diagnostics = diagnose_series(SeriesSet::from_chain(res.chain));
    return res;
}

// ---------------------------------------------------------------------------
// File emission (deterministic text)
// ---------------------------------------------------------------------------

inline std::string summary_table_csv(const std::map<std::string, ReplicationSummary>& summary,
                                     const std::vector<std::string>& columns) {
    std::ostringstream os;
    os << "metric";
    for (const auto& c : columns) os << ',' << c;
    os << '\n';
    const auto row = [&](const char* name, auto&& get) {
        os << name;
        for (const auto& c : columns) {
            os << ',';
            const auto it = summary.find(c);
            if (it != summary.end()) os << format_double(get(it->second));
        }
        os << '\n';
    };
    row("rmse", [](const ReplicationSummary& s) { return s.rmse; });
    row("rae", [](const ReplicationSummary& s) { return s.rae; });
    row("coverage", [](const ReplicationSummary& s) { return s.coverage; });
    row("width", [](const ReplicationSummary& s) { return s.width; });
    return os.str();
}

/// Truth file for a generated population. Networks are listed in row-major
/// extraction order so their labels line up with what any consumer of the
/// population file (including the sample command) will reconstruct.
inline nlohmann::json truth_json(const GeneratedPopulation& gen, const PopulationSpec& spec,
                                 std::uint64_t seed) {
    const auto extracted = extract_networks(gen.pop);
    std::vector<long> c_row_major = extracted.cells_per_network;
    std::vector<double> lambda_row_major(static_cast<std::size_t>(extracted.r_networks));
    for (long cell = 0; cell < gen.pop.n_cells(); ++cell) {
        const long lab = extracted.membership[static_cast<std::size_t>(cell)];
        if (lab >= 0)
            lambda_row_major[static_cast<std::size_t>(lab)] =
                gen.lambda[static_cast<std::size_t>(
                    gen.net.membership[static_cast<std::size_t>(cell)])];
    }
    nlohmann::json j;
    j["T"] = population_total(gen.pop);
    j["X"] = extracted.x_nonempty;
    j["R"] = extracted.r_networks;
    j["C"] = c_row_major;
    j["lambda"] = lambda_row_major;
    j["alpha"] = spec.alpha;
    j["beta"] = spec.beta;
    j["rows"] = spec.rows;
    j["cols"] = spec.cols;
    j["seed"] = seed;
    return j;
}

inline nlohmann::json diagnostics_json(const std::map<std::string, ParameterDiagnostics>& diag) {
    nlohmann::json j;
    for (const auto& [name, d] : diag) {
        if (d.degenerate) {
            j[name] = {{"skipped", "constant series"}};
        } else {
            j[name] = {{"geweke_z", d.geweke},
                       {"rl_nmin", d.rl_nmin},
                       {"rl_factor", d.rl_factor}};
        }
    }
    return j;
}

inline std::string diagnostics_summary_csv(const std::map<std::string, ParameterDiagnostics>& diag) {
    std::ostringstream os;
    os << "metric";
    for (const auto& [name, d] : diag) os << ',' << name;
    os << "\ngeweke_z";
    for (const auto& [name, d] : diag) {
        os << ',';
        if (!d.degenerate) os << format_double(d.geweke);
    }
    os << "\nrl_factor";
    for (const auto& [name, d] : diag) {
        os << ',';
        if (!d.degenerate) os << format_double(d.rl_factor);
    }
    os << '\n';
    return os.str();
}

}  // namespace rarepop
