#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rarepop/dists.hpp"
#include "rarepop/rng.hpp"

// Population representation and synthetic generation under the hierarchical
// count model, plus network extraction (4-connected components of non-empty
// cells) and the population file format.

namespace rarepop {

struct GridPopulation {
    long rows = 0;
    long cols = 0;
    std::vector<long> counts;  // row-major, rows*cols entries, all >= 0

    long n_cells() const { return rows * cols; }
    long at(long r, long c) const { return counts[static_cast<std::size_t>(r * cols + c)]; }
    long& at(long r, long c) { return counts[static_cast<std::size_t>(r * cols + c)]; }
};

struct NetworkStructure {
    long x_nonempty = 0;              // X: number of non-empty cells
    long r_networks = 0;              // R: number of non-empty networks
    std::vector<long> cells_per_network;  // C, by network label; sums to X
    std::vector<long> membership;     // cell index -> network label, -1 if empty

    /// Z = (C, 1, ..., 1): C extended by one 1 per empty cell.
    std::vector<long> z_sizes(long n_cells) const {
        std::vector<long> z = cells_per_network;
        z.resize(static_cast<std::size_t>(n_cells - x_nonempty + r_networks), 1);
        return z;
    }
};

struct PopulationSpec {
    long rows = 20;
    long cols = 20;
    double alpha = 0.15;  // expected fraction of non-empty cells
    double beta = 0.10;   // networks per non-empty cell
    // component rates: draw from Gamma(d, nu), share one constant rate, or
    // condition on a fixed vector (R is then redrawn until it matches)
    std::variant<GammaParam, double, std::vector<double>> lambda_gen = GammaParam{1.1, 0.13};

    void validate() const {
        if (rows < 1 || cols < 1) throw std::domain_error("population spec: grid dimensions must be positive");
        if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0))
            throw std::domain_error("population spec: alpha and beta must lie in (0,1)");
        if (const auto* v = std::get_if<std::vector<double>>(&lambda_gen)) {
            if (v->empty()) throw std::domain_error("population spec: fixed lambda vector is empty");
            for (double l : *v)
                if (!(l > 0.0)) throw std::domain_error("population spec: lambda components must be positive");
        } else if (const auto* c = std::get_if<double>(&lambda_gen)) {
            if (!(*c > 0.0)) throw std::domain_error("population spec: constant lambda must be positive");
        } else {
            const auto& g = std::get<GammaParam>(lambda_gen);
            if (!(g.shape > 0.0 && g.rate > 0.0))
                throw std::domain_error("population spec: lambda Gamma parameters must be positive");
        }
    }
};

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline long population_total(const GridPopulation& pop) {
    long t = 0;
    for (long c : pop.counts) t += c;
    return t;
}

/// Label the 4-connected components of non-empty cells. Labels follow the
/// row-major order of each component's first cell.
inline NetworkStructure extract_networks(const GridPopulation& pop) {
    const long n = pop.n_cells();
    NetworkStructure net;
    net.membership.assign(static_cast<std::size_t>(n), -1);
    std::vector<long> stack;
    for (long i = 0; i < n; ++i) {
        if (pop.counts[static_cast<std::size_t>(i)] <= 0 || net.membership[static_cast<std::size_t>(i)] != -1)
            continue;
        const long label = net.r_networks++;
        long size = 0;
        stack.push_back(i);
        net.membership[static_cast<std::size_t>(i)] = label;
        while (!stack.empty()) {
            const long cur = stack.back();
            stack.pop_back();
            ++size;
            const long r = cur / pop.cols, c = cur % pop.cols;
            const long nb[4] = {r > 0 ? cur - pop.cols : -1, r + 1 < pop.rows ? cur + pop.cols : -1,
                                c > 0 ? cur - 1 : -1, c + 1 < pop.cols ? cur + 1 : -1};
            for (long j : nb) {
                if (j < 0) continue;
                if (pop.counts[static_cast<std::size_t>(j)] > 0 &&
                    net.membership[static_cast<std::size_t>(j)] == -1) {
                    net.membership[static_cast<std::size_t>(j)] = label;
                    stack.push_back(j);
                }
            }
        }
        net.cells_per_network.push_back(size);
        net.x_nonempty += size;
    }
    if (net.r_networks == 0)
        throw std::domain_error("extract_networks: grid has no non-empty cell");
    return net;
}

namespace detail {

/// Place R disjoint 4-connected polyominoes of the given sizes, pairwise
/// separated by at least one empty cell (8-neighbourhood buffer, so rook
/// components can never merge). Returns cell indices per network or nullopt.
inline std::optional<std::vector<std::vector<long>>> try_place_networks(
    long rows, long cols, const std::vector<long>& sizes, RandomSource& rng) {
    const long n = rows * cols;
    // 0 free, 1 occupied, 2 buffered
    std::vector<char> state(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<long>> placed(sizes.size());

    std::vector<std::size_t> order(sizes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_below(i)]);

    for (std::size_t oi : order) {
        const long want = sizes[oi];
        bool done = false;
        for (int attempt = 0; attempt < 100 && !done; ++attempt) {
            std::vector<long> cells;
            std::vector<long> frontier;
            std::vector<char> mine(static_cast<std::size_t>(n), 0);
            std::vector<long> starts;
            for (long i = 0; i < n; ++i)
                if (state[static_cast<std::size_t>(i)] == 0) starts.push_back(i);
            if (starts.empty()) break;
            long cur = starts[rng.uniform_below(starts.size())];
            cells.push_back(cur);
            mine[static_cast<std::size_t>(cur)] = 1;
            auto push_neighbors = [&](long cell) {
                const long r = cell / cols, c = cell % cols;
                const long nb[4] = {r > 0 ? cell - cols : -1, r + 1 < rows ? cell + cols : -1,
                                    c > 0 ? cell - 1 : -1, c + 1 < cols ? cell + 1 : -1};
                for (long j : nb)
                    if (j >= 0 && state[static_cast<std::size_t>(j)] == 0 && !mine[static_cast<std::size_t>(j)])
                        frontier.push_back(j);
            };
            push_neighbors(cur);
            while (static_cast<long>(cells.size()) < want) {
                // prune frontier entries grabbed meanwhile
                while (!frontier.empty()) {
                    const std::size_t pick = frontier.size() == 1 ? 0 : rng.uniform_below(frontier.size());
                    const long cand = frontier[pick];
                    frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));
                    if (!mine[static_cast<std::size_t>(cand)]) {
                        cells.push_back(cand);
                        mine[static_cast<std::size_t>(cand)] = 1;
                        push_neighbors(cand);
                        break;
                    }
                }
                if (static_cast<long>(cells.size()) < want && frontier.empty()) break;
            }
            if (static_cast<long>(cells.size()) == want) {
                for (long cell : cells) {
                    state[static_cast<std::size_t>(cell)] = 1;
                    const long r = cell / cols, c = cell % cols;
                    for (long dr = -1; dr <= 1; ++dr)
                        for (long dc = -1; dc <= 1; ++dc) {
                            const long rr = r + dr, cc = c + dc;
                            if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                            char& s = state[static_cast<std::size_t>(rr * cols + cc)];
                            if (s == 0) s = 2;
                        }
                }
                placed[oi] = std::move(cells);
                done = true;
            }
        }
        if (!done) return std::nullopt;
    }
    return placed;
}

}  // namespace detail

struct GeneratedPopulation {
    GridPopulation pop;
    NetworkStructure net;          // labels in ascending-lambda order
    std::vector<double> lambda;    // true rates, ascending, one per network
};

/// Draw (X, R, C) from the hierarchical model, realize the networks spatially,
/// and fill per-cell counts from the per-network truncated Poisson rates.
/// When the spec fixes the lambda vector, (X, R, C) are redrawn until R
/// matches its length, mirroring the conditioned-R simulation design.
inline GeneratedPopulation generate_population(const PopulationSpec& spec, RandomSource& rng) {
    spec.validate();
    const long n = spec.rows * spec.cols;
    const std::vector<double>* fixed = std::get_if<std::vector<double>>(&spec.lambda_gen);

    long X = 0, R = 0;
    std::vector<long> c_sizes;
    for (long draw = 0;; ++draw) {
        X = trunc_binomial_sample(n, spec.alpha, rng);
        R = trunc_binomial_sample(X, spec.beta, rng);
        if (!fixed || R == static_cast<long>(fixed->size())) break;
        if (draw >= 200000)
            throw GenerationError("generate_population: could not realize R = " +
                                  std::to_string(fixed->size()) + " networks after 200000 draws");
    }
    c_sizes = shifted_multinomial_sample(X, R, rng);

    std::vector<double> lambda;
    if (fixed) {
        lambda = *fixed;
    } else if (const auto* shared = std::get_if<double>(&spec.lambda_gen)) {
        lambda.assign(static_cast<std::size_t>(R), *shared);
    } else {
        const auto& g = std::get<GammaParam>(spec.lambda_gen);
        lambda.resize(static_cast<std::size_t>(R));
        for (auto& l : lambda) l = gamma_sample(g, rng);
    }
    std::sort(lambda.begin(), lambda.end());

    std::optional<std::vector<std::vector<long>>> placed;
    for (int restart = 0; restart < 1000 && !placed; ++restart)
        placed = detail::try_place_networks(spec.rows, spec.cols, c_sizes, rng);
    if (!placed)
        throw GenerationError("generate_population: could not place " + std::to_string(R) +
                              " buffered networks covering X=" + std::to_string(X) +
                              " cells on an N=" + std::to_string(n) + " grid");

    GeneratedPopulation out;
    out.pop.rows = spec.rows;
    out.pop.cols = spec.cols;
    out.pop.counts.assign(static_cast<std::size_t>(n), 0);
    out.net.x_nonempty = X;
    out.net.r_networks = R;
    out.net.cells_per_network = c_sizes;
    out.net.membership.assign(static_cast<std::size_t>(n), -1);
    out.lambda = lambda;
    for (std::size_t j = 0; j < placed->size(); ++j) {
        for (long cell : (*placed)[j]) {
            out.net.membership[static_cast<std::size_t>(cell)] = static_cast<long>(j);
            out.pop.counts[static_cast<std::size_t>(cell)] =
                trunc_poisson_sample({lambda[j]}, rng);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Population file: one cell per line "row,col,count", zero-based coordinates,
// '#' comments allowed; cells absent from the file are zero.
// ---------------------------------------------------------------------------

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline GridPopulation ingest_grid(std::istream& in, long rows, long cols, const std::string& name = "<stream>") {
    if (rows < 1 || cols < 1) throw std::domain_error("ingest_grid: dimensions must be positive");
    GridPopulation pop;
    pop.rows = rows;
    pop.cols = cols;
    pop.counts.assign(static_cast<std::size_t>(rows * cols), 0);
    std::vector<char> seen(static_cast<std::size_t>(rows * cols), 0);
    std::string line;
    long line_no = 0;
    auto fail = [&](const std::string& what) {
        throw ParseError(name + ":" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        long r, c, v;
        char sep1, sep2;
        std::istringstream ls(line);
        if (!(ls >> r >> sep1 >> c >> sep2 >> v) || sep1 != ',' || sep2 != ',')
            fail("expected 'row,col,count'");
        std::string rest;
        if (ls >> rest) fail("trailing content '" + rest + "'");
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            fail("cell (" + std::to_string(r) + "," + std::to_string(c) + ") outside the " +
                 std::to_string(rows) + "x" + std::to_string(cols) + " grid");
        if (v < 0) fail("negative count");
        const auto idx = static_cast<std::size_t>(r * cols + c);
        if (seen[idx]) fail("duplicate cell (" + std::to_string(r) + "," + std::to_string(c) + ")");
        seen[idx] = 1;
        pop.counts[idx] = v;
    }
    if (population_total(pop) < 1)
        throw std::domain_error(name + ": grid has no non-empty cell");
    return pop;
}

inline GridPopulation ingest_grid(const std::string& path, long rows, long cols) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    return ingest_grid(in, rows, cols, path);
}

inline void write_grid(std::ostream& out, const GridPopulation& pop) {
    for (long r = 0; r < pop.rows; ++r)
        for (long c = 0; c < pop.cols; ++c)
            if (pop.at(r, c) > 0) out << r << ',' << c << ',' << pop.at(r, c) << '\n';
}

inline void write_grid(const std::string& path, const GridPopulation& pop) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    write_grid(out, pop);
}

}  // namespace rarepop
