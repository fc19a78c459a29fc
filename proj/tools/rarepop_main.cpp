#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rarepop/chain_io.hpp"
#include "rarepop/config.hpp"
#include "rarepop/harness.hpp"

// rarepop <mode> --config <file> [--seed N] [--out DIR] [--full-scale]
//
// Modes: generate, sample, fit-mixture, fit-network, diagnose, replicate,
// compare, prior-sensitivity. Every mode is a pure function of the config
// file, its input files and the seed; outputs are deterministic text files.
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

namespace {

using namespace rarepop;

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

nlohmann::json base_meta(const RunConfig& cfg, const std::string& mode) {
    nlohmann::json meta;
    meta["mode"] = mode;
    meta["seed"] = cfg.seed;
    meta["scale"] = cfg.full_scale ? "full" : "desk";
    meta["iterations"] = cfg.mcmc.iterations;
    meta["burn_in"] = cfg.mcmc.burn_in;
    meta["thin"] = cfg.mcmc.thin;
    meta["replications"] = cfg.replications;
    meta["initial_fraction"] = cfg.initial_fraction;
    return meta;
}

void add_failures(nlohmann::json& meta, const std::vector<std::pair<long, std::string>>& failures) {
    meta["failed_replications"] = nlohmann::json::array();
    for (const auto& [rep, what] : failures)
        meta["failed_replications"].push_back({{"replication", rep}, {"error", what}});
}

void cmd_generate(const RunConfig& cfg, const std::string& out) {
    RandomSource rng(cfg.seed, 0);
    const auto gen = generate_population(cfg.population, rng);
    std::ostringstream grid;
    write_grid(grid, gen.pop);
    write_text_file(join(out, "population.csv"), grid.str());
    write_text_file(join(out, "truth.json"),
                    truth_json(gen, cfg.population, cfg.seed).dump(2) + "\n");
}

void cmd_sample(const RunConfig& cfg, const std::string& out) {
    if (cfg.population_file.empty() || cfg.rows < 1 || cfg.cols < 1)
        throw ConfigError("sample: population_file, rows and cols are required");
    const auto pop = ingest_grid(cfg.population_file, cfg.rows, cfg.cols);
    const auto net = extract_networks(pop);
    RandomSource rng(cfg.seed, 1);
    const auto s = adaptive_sample(pop, net, cfg.initial_fraction, rng);
    write_text_file(join(out, "sample.json"), to_json(s).dump(2) + "\n");
}

AdaptiveSample load_sample(const RunConfig& cfg) {
    if (cfg.sample_file.empty()) throw ConfigError("fit: sample_file is required");
    return sample_from_json(nlohmann::json::parse(read_text_file(cfg.sample_file)));
}

void write_chain_files(const Chain& chain, const std::string& out) {
    std::ostringstream cs, ps;
    write_chain_csv(cs, chain);
    write_components_csv(ps, chain);
    write_text_file(join(out, "chain.csv"), cs.str());
    write_text_file(join(out, "components.csv"), ps.str());
    write_text_file(join(out, "acceptance.json"), acceptance_json(chain).dump(2) + "\n");
}

void cmd_fit(const RunConfig& cfg, const std::string& out, bool network) {
    const auto s = load_sample(cfg);
    std::vector<long> ys;
    for (const auto& w : s.networks)
        for (long y : w.counts)
            if (y > 0) ys.push_back(y);
    const auto priors = cfg.make_priors(ys);
    const auto chain =
        network ? fit_network_model(s, priors, cfg.mcmc) : fit_mixture(s, priors, cfg.mcmc);
    write_chain_files(chain, out);
}

void cmd_diagnose(const RunConfig& cfg, const std::string& out) {
    if (cfg.chain_file.empty() || cfg.components_file.empty())
        throw ConfigError("diagnose: chain_file and components_file are required");
    std::ifstream cin_file(cfg.chain_file);
    if (!cin_file) throw std::runtime_error(cfg.chain_file + ": cannot open");
    const auto chain = read_chain_csv(cin_file, cfg.chain_file);
    std::ifstream pin(cfg.components_file);
    if (!pin) throw std::runtime_error(cfg.components_file + ": cannot open");
    const auto comps = read_components_csv(pin, cfg.components_file);
    const auto diag = diagnose_series(SeriesSet::from_files(chain, comps));
    write_text_file(join(out, "diagnostics.json"), diagnostics_json(diag).dump(2) + "\n");
    write_text_file(join(out, "summary.csv"), diagnostics_summary_csv(diag));
}

void cmd_replicate(const RunConfig& cfg, const std::string& out) {
    const auto res = run_replicate(cfg);
    write_text_file(join(out, "summary.csv"),
                    summary_table_csv(res.summary, {"T", "alpha", "beta", "nu", "lambda_s",
                                                    "lambda_unobs"}));
    std::ostringstream reps;
    reps << "rep,truth_T,est_T,t_lo,t_hi,covered\n";
    for (std::size_t i = 0; i < res.reps.size(); ++i) {
        const auto& r = res.reps[i];
        reps << i << ',' << format_double(r.t.truth) << ',' << format_double(r.t.estimate) << ','
             << format_double(r.t.interval.lower) << ',' << format_double(r.t.interval.upper)
             << ',' << (r.t.interval.contains(r.t.truth) ? 1 : 0) << '\n';
    }
    write_text_file(join(out, "replications.csv"), reps.str());
    auto meta = base_meta(cfg, "replicate");
    add_failures(meta, res.failures);
    write_text_file(join(out, "meta.json"), meta.dump(2) + "\n");
}

void cmd_compare(const RunConfig& cfg, const std::string& out) {
    const auto res = run_compare(cfg);
    write_text_file(join(out, "comparison.csv"),
                    summary_table_csv(res.summary,
                                      {"mixture_T", "network_T", "mixture_alpha", "network_alpha",
                                       "mixture_beta", "network_beta"}));
    std::ostringstream res_csv;
    res_csv << "rep,truth_T,mixture_re,network_re\n";
    for (std::size_t i = 0; i < res.reps.size(); ++i) {
        const auto& r = res.reps[i];
        res_csv << i << ',' << format_double(r.truth_t) << ','
                << format_double((r.mixture_t.estimate - r.truth_t) / r.truth_t) << ','
                << format_double((r.network_t.estimate - r.truth_t) / r.truth_t) << '\n';
    }
    write_text_file(join(out, "relative_errors.csv"), res_csv.str());
    auto meta = base_meta(cfg, "compare");
    meta["compare_mode"] = cfg.compare_mode;
    if (res.efficiency) meta["efficiency"] = *res.efficiency;
    add_failures(meta, res.failures);
    write_text_file(join(out, "meta.json"), meta.dump(2) + "\n");
}

void cmd_prior_sensitivity(const RunConfig& cfg, const std::string& out) {
    const auto res = run_prior_sensitivity(cfg);
    std::ostringstream lam;
    lam << "r_true,prior,lambda_index,observed,rmse,count\n";
    for (const auto& [key, cell] : res.lambda_rmse)
        lam << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
            << (std::get<3>(key) ? 1 : 0) << ',' << format_double(cell.rmse) << ',' << cell.count
            << '\n';
    write_text_file(join(out, "lambda_rmse.csv"), lam.str());

    std::ostringstream ri;
    ri << "r_true,prior,rep,r_lo,r_median,r_hi\n";
    for (const auto& r : res.r_intervals)
        ri << r.r_true << ',' << r.prior << ',' << r.rep << ',' << format_double(r.lo) << ','
           << format_double(r.median) << ',' << format_double(r.hi) << '\n';
    write_text_file(join(out, "r_intervals.csv"), ri.str());

    std::ostringstream ts;
    ts << "r_true,prior,rmse,rae,coverage,width\n";
    for (const auto& [key, s] : res.t_summary)
        ts << key.first << ',' << key.second << ',' << format_double(s.rmse) << ','
           << format_double(s.rae) << ',' << format_double(s.coverage) << ','
           << format_double(s.width) << '\n';
    write_text_file(join(out, "total_summary.csv"), ts.str());

    auto meta = base_meta(cfg, "prior-sensitivity");
    add_failures(meta, res.failures);
    write_text_file(join(out, "meta.json"), meta.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rare, clustered population simulation and Bayesian estimation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    bool full_scale = false;

    const std::vector<std::string> modes{"generate",  "sample",  "fit-mixture",
                                         "fit-network", "diagnose", "replicate",
                                         "compare",   "prior-sensitivity"};
    for (const auto& m : modes) {
        auto* sub = app.add_subcommand(m);
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_dir, "output directory (default: current)");
        sub->add_option("--seed", seed_override, "override the config seed")
            ->each([&](const std::string&) { seed_given = true; });
        sub->add_flag("--full-scale", full_scale,
                      "paper-scale sweep and replication counts");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    const std::string mode = app.get_subcommands().front()->get_name();
    try {
        RunConfig cfg = RunConfig::from_file(config_path);
        if (seed_given) {
            cfg.seed = seed_override;
            cfg.mcmc.seed = seed_override;
        }
        if (full_scale) cfg.apply_full_scale();
        std::filesystem::create_directories(out_dir);

        if (mode == "generate") cmd_generate(cfg, out_dir);
        else if (mode == "sample") cmd_sample(cfg, out_dir);
        else if (mode == "fit-mixture") cmd_fit(cfg, out_dir, false);
        else if (mode == "fit-network") cmd_fit(cfg, out_dir, true);
        else if (mode == "diagnose") cmd_diagnose(cfg, out_dir);
        else if (mode == "replicate") cmd_replicate(cfg, out_dir);
        else if (mode == "compare") cmd_compare(cfg, out_dir);
        else if (mode == "prior-sensitivity") cmd_prior_sensitivity(cfg, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
