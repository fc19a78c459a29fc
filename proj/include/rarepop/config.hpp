#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rarepop/grid.hpp"
#include "rarepop/model.hpp"
#include "rarepop/sampler.hpp"

// Run configuration: one JSON document embedding the population spec, the
// prior block and the MCMC block, plus mode-specific paths and knobs.

namespace rarepop {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    PopulationSpec population;
    std::uint64_t seed = 1;

    // prior block
    double a_alpha = 3.0, b_alpha = 1.0;
    double a_beta = 15.0, b_beta = 9.0;
    std::string lambda_prior = "independent";
    double d = 1.1;
    double e = 2.0;
    std::optional<double> f;  // elicited from the observed counts when absent
    double tau = 5.0;

    McmcConfig mcmc;

    double initial_fraction = 0.05;
    long replications = 100;
    int jobs = 1;

    // mode-specific inputs
    std::string population_file;
    std::string sample_file;
    std::string chain_file;
    std::string components_file;
    long rows = 0, cols = 0;
    std::string compare_mode = "model";  // "model" or "design"
    std::vector<double> tau_grid = {1.0, 5.0, 10.0, 20.0};
    std::vector<std::vector<double>> lambda_truths = {
        {4.5, 4.8, 8.0, 11.3, 13.8},
        {3.9, 6.4, 6.9, 7.1, 10.5, 14.8},
        {4.8, 7.4, 9.5, 10.1, 11.4, 11.7, 14.5}};

    bool full_scale = false;

    /// Paper-scale sweep counts and replication count; desk scale otherwise.
    void apply_full_scale() {
        full_scale = true;
        mcmc.iterations = 100000;
        mcmc.burn_in = 10000;
        mcmc.thin = 90;
        replications *= 5;
    }

    PriorConfig make_priors(const std::vector<long>& observed_counts) const {
        PriorConfig pr;
        pr.alpha_prior = {a_alpha, b_alpha};
        pr.beta_prior = {a_beta, b_beta};
        if (lambda_prior == "independent") {
            double rate;
            if (f) {
                rate = *f;
            } else if (!observed_counts.empty()) {
                rate = elicit_independent_hyperparams(observed_counts, d, e).rate;
            } else {
                rate = e;  // prior mean d for the rates when nothing is observed
            }
            pr.lambda_prior = IndependentLambdaPrior{d, {e, rate}};
        } else if (lambda_prior == "dependent") {
            pr.lambda_prior = DependentLambdaPrior{tau};
        } else {
            throw ConfigError("priors: lambda_prior must be 'independent' or 'dependent'");
        }
        return pr;
    }

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);
};

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError(std::string("config field '") + key + "': " + ex.what());
        }
    }
}

}  // namespace detail

inline RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    if (!j.is_object()) throw ConfigError("config: top-level JSON object expected");
    detail::read_field(j, "seed", c.seed);
    c.mcmc.seed = c.seed;

    if (j.contains("population")) {
        const auto& p = j.at("population");
        detail::read_field(p, "rows", c.population.rows);
        detail::read_field(p, "cols", c.population.cols);
        detail::read_field(p, "alpha", c.population.alpha);
        detail::read_field(p, "beta", c.population.beta);
        if (p.contains("lambda")) {
            const auto& l = p.at("lambda");
            if (l.contains("values")) {
                c.population.lambda_gen = l.at("values").get<std::vector<double>>();
            } else if (l.contains("constant")) {
                c.population.lambda_gen = l.at("constant").get<double>();
            } else if (l.contains("d") && l.contains("nu")) {
                c.population.lambda_gen =
                    GammaParam{l.at("d").get<double>(), l.at("nu").get<double>()};
            } else {
                throw ConfigError(
                    "population.lambda: expected {d, nu}, {constant} or {values}");
            }
        }
        try {
            c.population.validate();
        } catch (const std::domain_error& ex) {
            throw ConfigError(ex.what());
        }
    }

    if (j.contains("priors")) {
        const auto& p = j.at("priors");
        detail::read_field(p, "a_alpha", c.a_alpha);
        detail::read_field(p, "b_alpha", c.b_alpha);
        detail::read_field(p, "a_beta", c.a_beta);
        detail::read_field(p, "b_beta", c.b_beta);
        detail::read_field(p, "lambda_prior", c.lambda_prior);
        detail::read_field(p, "d", c.d);
        detail::read_field(p, "e", c.e);
        detail::read_field(p, "tau", c.tau);
        if (p.contains("f")) c.f = p.at("f").get<double>();
        if (c.lambda_prior != "independent" && c.lambda_prior != "dependent")
            throw ConfigError("priors: lambda_prior must be 'independent' or 'dependent'");
        if (!(c.a_alpha > 0 && c.b_alpha > 0 && c.a_beta > 0 && c.b_beta > 0))
            throw ConfigError("priors: Beta parameters must be positive");
        if (!(c.d > 0 && c.e > 0 && c.tau > 0))
            throw ConfigError("priors: d, e and tau must be positive");
    }

    if (j.contains("mcmc")) {
        const auto& m = j.at("mcmc");
        detail::read_field(m, "iterations", c.mcmc.iterations);
        detail::read_field(m, "burn_in", c.mcmc.burn_in);
        detail::read_field(m, "thin", c.mcmc.thin);
        detail::read_field(m, "seed", c.mcmc.seed);
        try {
            c.mcmc.validate();
        } catch (const std::domain_error& ex) {
            throw ConfigError(ex.what());
        }
    }

    detail::read_field(j, "initial_fraction", c.initial_fraction);
    if (!(c.initial_fraction > 0.0 && c.initial_fraction <= 1.0))
        throw ConfigError("initial_fraction must lie in (0, 1]");
    detail::read_field(j, "replications", c.replications);
    if (c.replications < 1) throw ConfigError("replications must be >= 1");
    detail::read_field(j, "jobs", c.jobs);
    if (c.jobs < 1) throw ConfigError("jobs must be >= 1");

    detail::read_field(j, "population_file", c.population_file);
    detail::read_field(j, "sample_file", c.sample_file);
    detail::read_field(j, "chain_file", c.chain_file);
    detail::read_field(j, "components_file", c.components_file);
    detail::read_field(j, "rows", c.rows);
    detail::read_field(j, "cols", c.cols);
    detail::read_field(j, "compare_mode", c.compare_mode);
    if (c.compare_mode != "model" && c.compare_mode != "design")
        throw ConfigError("compare_mode must be 'model' or 'design'");
    detail::read_field(j, "tau_grid", c.tau_grid);
    if (j.contains("lambda_truths"))
        c.lambda_truths = j.at("lambda_truths").get<std::vector<std::vector<double>>>();
    for (const auto& v : c.lambda_truths) {
        if (v.empty()) throw ConfigError("lambda_truths: empty truth vector");
        for (double l : v)
            if (!(l > 0.0)) throw ConfigError("lambda_truths: rates must be positive");
    }
    return c;
}

inline RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(path + ": " + ex.what());
    }
    return from_json(j);
}

}  // namespace rarepop
