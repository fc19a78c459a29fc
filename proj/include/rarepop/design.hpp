#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rarepop/grid.hpp"
#include "rarepop/numeric.hpp"
#include "rarepop/rng.hpp"

// Adaptive cluster sampling execution and the model's selection probability:
// networks are selected sequentially with probability proportional to size,
// without replacement, and the probability of the observed ordered size
// sequence enters the likelihood.

namespace rarepop {

struct SampledNetwork {
    long label = -1;           // source-population network label, -1 for empty
    long size = 1;             // z: number of cells
    std::vector<long> cells;   // grid cell indices
    std::vector<long> counts;  // per-cell counts aligned with cells (0 for empty)

    bool non_empty() const { return !counts.empty() && counts.front() > 0; }
    long total() const {
        long t = 0;
        for (long y : counts) t += y;
        return t;
    }
};

struct AdaptiveSample {
    long n_cells = 0;                     // N of the source grid
    std::vector<long> initial_cells;      // SRSWOR first stage, in draw order
    std::vector<SampledNetwork> networks; // distinct networks, first-hit order
    std::vector<long> edge_cells;         // observed-empty boundary cells
    std::uint64_t seed = 0;

    long m() const { return static_cast<long>(networks.size()); }
    long r_s() const {
        long r = 0;
        for (const auto& w : networks) r += w.non_empty() ? 1 : 0;
        return r;
    }
    long x_s() const {
        long x = 0;
        for (const auto& w : networks)
            if (w.non_empty()) x += w.size;
        return x;
    }
    long total_observed() const {
        long t = 0;
        for (const auto& w : networks) t += w.total();
        return t;
    }
    std::vector<long> ordered_sizes() const {
        std::vector<long> z;
        z.reserve(networks.size());
        for (const auto& w : networks) z.push_back(w.size);
        return z;
    }
};

/// Run adaptive cluster sampling: an SRSWOR first stage of ceil(fraction * N)
/// cells, every non-empty hit expanded to its whole network plus edge units.
/// Networks are listed in first-hit order of the sequentially drawn cells.
inline AdaptiveSample adaptive_sample(const GridPopulation& pop, const NetworkStructure& net,
                                      double initial_fraction, RandomSource& rng) {
    if (!(initial_fraction > 0.0 && initial_fraction <= 1.0))
        throw std::domain_error("adaptive_sample: initial_fraction must lie in (0, 1]");
    const long n = pop.n_cells();
    const long n0 = static_cast<long>(std::ceil(initial_fraction * static_cast<double>(n)));

    AdaptiveSample s;
    s.n_cells = n;
    s.seed = rng.seed();

    // partial Fisher-Yates: the first n0 entries are the ordered SRSWOR draw
    std::vector<long> perm(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (long i = 0; i < n0; ++i) {
        const long j = i + static_cast<long>(rng.uniform_below(static_cast<std::uint64_t>(n - i)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    s.initial_cells.assign(perm.begin(), perm.begin() + n0);

    std::set<long> hit_networks;
    std::set<long> edge;
    for (long cell : s.initial_cells) {
        const long label = net.membership[static_cast<std::size_t>(cell)];
        if (label < 0) {
            SampledNetwork w;
            w.label = -1;
            w.size = 1;
            w.cells = {cell};
            w.counts = {0};
            s.networks.push_back(std::move(w));
            continue;
        }
        if (!hit_networks.insert(label).second) continue;
        SampledNetwork w;
        w.label = label;
        for (long i = 0; i < n; ++i)
            if (net.membership[static_cast<std::size_t>(i)] == label) w.cells.push_back(i);
        w.size = static_cast<long>(w.cells.size());
        for (long i : w.cells) {
            w.counts.push_back(pop.counts[static_cast<std::size_t>(i)]);
            const long r = i / pop.cols, c = i % pop.cols;
            const long nb[4] = {r > 0 ? i - pop.cols : -1, r + 1 < pop.rows ? i + pop.cols : -1,
                                c > 0 ? i - 1 : -1, c + 1 < pop.cols ? i + 1 : -1};
            for (long j : nb)
                if (j >= 0 && net.membership[static_cast<std::size_t>(j)] < 0) edge.insert(j);
        }
        s.networks.push_back(std::move(w));
    }
    s.edge_cells.assign(edge.begin(), edge.end());
    return s;
}

// ---------------------------------------------------------------------------
// Selection probability of an ordered size sequence under sequential PPS
// without replacement. g counts the exchangeable unselected networks of the
// drawn size, so the probabilities over feasible size sequences sum to one.
// ---------------------------------------------------------------------------

inline double selection_log_prob(std::span<const long> ordered_sizes,
                                 const std::vector<long>& z_all) {
    if (ordered_sizes.empty()) throw std::domain_error("selection_log_prob: empty sequence");
    if (ordered_sizes.size() > z_all.size()) return kNegInf;
    std::map<long, long> avail;
    double denom = 0.0;
    for (long z : z_all) {
        if (z < 1) throw std::domain_error("selection_log_prob: network sizes must be >= 1");
        ++avail[z];
        denom += static_cast<double>(z);
    }
    double lp = 0.0;
    for (long z : ordered_sizes) {
        const auto it = avail.find(z);
        const long g = it == avail.end() ? 0 : it->second;
        if (g <= 0 || denom <= 0.0) return kNegInf;
        lp += std::log(static_cast<double>(z) * static_cast<double>(g)) - std::log(denom);
        --it->second;
        denom -= static_cast<double>(z);
    }
    return lp;
}

/// Brute-force oracle for the selection law: exact probability of every
/// feasible ordered size sequence of length m. Guarded to test scales.
inline std::map<std::vector<long>, double> enumerate_selection_probs(const std::vector<long>& z_all,
                                                                     long m) {
    if (z_all.size() > 12) throw std::domain_error("enumerate_selection_probs: |Z| <= 12 required");
    if (m < 1 || m > static_cast<long>(z_all.size()))
        throw std::domain_error("enumerate_selection_probs: need 1 <= m <= |Z|");
    std::map<std::vector<long>, double> out;
    std::map<long, long> avail;
    double denom = 0.0;
    for (long z : z_all) {
        ++avail[z];
        denom += static_cast<double>(z);
    }
    std::vector<long> prefix;
    auto recurse = [&](auto&& self, double prob, double rem) -> void {
        if (static_cast<long>(prefix.size()) == m) {
            out[prefix] += prob;
            return;
        }
        for (auto& [z, g] : avail) {
            if (g <= 0) continue;
            const double p = prob * static_cast<double>(z) * static_cast<double>(g) / rem;
            --g;
            prefix.push_back(z);
            self(self, p, rem - static_cast<double>(z));
            prefix.pop_back();
            ++g;
        }
    };
    recurse(recurse, 1.0, denom);
    return out;
}

// ---------------------------------------------------------------------------
// Sample artifact JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const AdaptiveSample& s) {
    nlohmann::json j;
    j["N"] = s.n_cells;
    j["seed"] = s.seed;
    j["initial_cells"] = s.initial_cells;
    j["edge_cells"] = s.edge_cells;
    j["networks"] = nlohmann::json::array();
    for (const auto& w : s.networks) {
        j["networks"].push_back({{"label", w.label},
                                 {"size", w.size},
                                 {"cells", w.cells},
                                 {"counts", w.counts}});
    }
    return j;
}

inline AdaptiveSample sample_from_json(const nlohmann::json& j) {
    AdaptiveSample s;
    s.n_cells = j.at("N").get<long>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.initial_cells = j.at("initial_cells").get<std::vector<long>>();
    s.edge_cells = j.at("edge_cells").get<std::vector<long>>();
    for (const auto& wj : j.at("networks")) {
        SampledNetwork w;
        w.label = wj.at("label").get<long>();
        w.size = wj.at("size").get<long>();
        w.cells = wj.at("cells").get<std::vector<long>>();
        w.counts = wj.at("counts").get<std::vector<long>>();
        if (w.size != static_cast<long>(w.cells.size()) ||
            w.cells.size() != w.counts.size())
            throw std::domain_error("sample JSON: inconsistent network record");
        s.networks.push_back(std::move(w));
    }
    if (s.networks.empty()) throw std::domain_error("sample JSON: no networks");
    return s;
}

}  // namespace rarepop
