#include <catch2/catch.hpp>

#include <cmath>
#include <set>

#include "rarepop/design.hpp"

using namespace rarepop;

TEST_CASE("selection probability on hand-enumerated cases", "[design]") {
    const std::vector<long> z{2, 1, 1};
    // one draw
    REQUIRE(std::exp(selection_log_prob(std::vector<long>{2}, z)) == Approx(0.5).margin(1e-14));
    REQUIRE(std::exp(selection_log_prob(std::vector<long>{1}, z)) == Approx(0.5).margin(1e-14));
    // two draws
    REQUIRE(std::exp(selection_log_prob(std::vector<long>{2, 1}, z)) ==
            Approx(0.5).margin(1e-14));
    REQUIRE(std::exp(selection_log_prob(std::vector<long>{1, 2}, z)) ==
            Approx(1.0 / 3.0).margin(1e-14));
    REQUIRE(std::exp(selection_log_prob(std::vector<long>{1, 1}, z)) ==
            Approx(1.0 / 6.0).margin(1e-14));
    // infeasible sequences signal impossible configurations
    REQUIRE(selection_log_prob(std::vector<long>{3}, z) == kNegInf);
    REQUIRE(selection_log_prob(std::vector<long>{2, 2}, z) == kNegInf);
    REQUIRE_THROWS_AS(selection_log_prob(std::vector<long>{}, z), std::domain_error);
}

TEST_CASE("selection enumeration oracle", "[design]") {
    auto probs = enumerate_selection_probs({1, 1}, 2);
    REQUIRE(probs.size() == 1);
    REQUIRE(probs.at({1, 1}) == Approx(1.0).margin(1e-14));

    probs = enumerate_selection_probs({3}, 1);
    REQUIRE(probs.size() == 1);
    REQUIRE(probs.at({3}) == Approx(1.0).margin(1e-14));

    probs = enumerate_selection_probs({2, 1, 1}, 2);
    REQUIRE(probs.at({2, 1}) == Approx(0.5).margin(1e-14));
    REQUIRE(probs.at({1, 2}) == Approx(1.0 / 3.0).margin(1e-14));
    REQUIRE(probs.at({1, 1}) == Approx(1.0 / 6.0).margin(1e-14));

    REQUIRE_THROWS_AS(enumerate_selection_probs(std::vector<long>(13, 1), 2), std::domain_error);
}

TEST_CASE("selection law sums to one and matches enumeration", "[design]") {
    // a spread of multisets with |Z| <= 6 at unit-test scale
    const std::vector<std::vector<long>> zs = {
        {1, 1, 1}, {2, 1, 1, 1}, {3, 2, 1}, {2, 2, 2, 1}, {4, 3, 2, 1, 1}, {5, 1, 1, 1, 1, 1}};
    for (const auto& z : zs) {
        for (long m = 1; m <= static_cast<long>(z.size()); ++m) {
            const auto probs = enumerate_selection_probs(z, m);
            double sum = 0.0;
            for (const auto& [seq, p] : probs) {
                sum += p;
                REQUIRE(std::exp(selection_log_prob(seq, z)) == Approx(p).epsilon(1e-12));
            }
            REQUIRE(sum == Approx(1.0).margin(1e-10));
        }
    }
}

namespace {

GeneratedPopulation small_population(std::uint64_t seed) {
    RandomSource rng(seed);
    PopulationSpec spec;
    spec.rows = 8;
    spec.cols = 8;
    spec.alpha = 0.15;
    spec.beta = 0.3;
    spec.lambda_gen = GammaParam{2.0, 0.5};
    return generate_population(spec, rng);
}

}  // namespace

TEST_CASE("adaptive sampling observes whole networks in first-hit order", "[design]") {
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        const auto gen = small_population(seed);
        RandomSource rng(seed, 1);
        const auto s = adaptive_sample(gen.pop, gen.net, 0.15, rng);
        REQUIRE(s.m() >= 1);
        std::set<long> seen_labels;
        std::set<long> touched_labels;
        for (long cell : s.initial_cells) {
            const long lab = gen.net.membership[static_cast<std::size_t>(cell)];
            if (lab >= 0) touched_labels.insert(lab);
        }
        long n_empty_draws = 0;
        for (const auto& w : s.networks) {
            if (!w.non_empty()) {
                ++n_empty_draws;
                REQUIRE(w.size == 1);
                REQUIRE(w.counts == std::vector<long>{0});
                REQUIRE(gen.net.membership[static_cast<std::size_t>(w.cells[0])] == -1);
                continue;
            }
            // network closure: all cells of the source network, exactly once
            REQUIRE(seen_labels.insert(w.label).second);
            std::vector<long> source_cells;
            for (long i = 0; i < gen.pop.n_cells(); ++i)
                if (gen.net.membership[static_cast<std::size_t>(i)] == w.label)
                    source_cells.push_back(i);
            REQUIRE(w.cells == source_cells);
            REQUIRE(w.size == static_cast<long>(source_cells.size()));
            for (std::size_t k = 0; k < w.cells.size(); ++k)
                REQUIRE(w.counts[k] == gen.pop.counts[static_cast<std::size_t>(w.cells[k])]);
        }
        // m equals distinct intersected networks plus selected empty cells
        REQUIRE(seen_labels == touched_labels);
        REQUIRE(s.m() == static_cast<long>(touched_labels.size()) + n_empty_draws);
        // edge cells are observed-empty neighbours, never network members
        for (long e : s.edge_cells)
            REQUIRE(gen.net.membership[static_cast<std::size_t>(e)] == -1);
    }
}

TEST_CASE("census sample lists every network exactly once", "[design]") {
    const auto gen = small_population(5);
    RandomSource rng(9, 2);
    const auto s = adaptive_sample(gen.pop, gen.net, 1.0, rng);
    const long n = gen.pop.n_cells();
    REQUIRE(s.m() == gen.net.r_networks + (n - gen.net.x_nonempty));
    REQUIRE(s.x_s() == gen.net.x_nonempty);
    REQUIRE(s.r_s() == gen.net.r_networks);
    REQUIRE(s.total_observed() == population_total(gen.pop));
}

TEST_CASE("single non-empty cell and its edge units", "[design]") {
    GridPopulation pop;
    pop.rows = 3;
    pop.cols = 3;
    pop.counts.assign(9, 0);
    pop.at(0, 0) = 4;
    const auto net = extract_networks(pop);
    RandomSource rng(3);
    const auto s = adaptive_sample(pop, net, 1.0, rng);
    long non_empty = 0;
    for (const auto& w : s.networks)
        if (w.non_empty()) {
            ++non_empty;
            REQUIRE(w.size == 1);
            REQUIRE(w.cells == std::vector<long>{0});
        }
    REQUIRE(non_empty == 1);
    // edge cells of (0,0): (0,1) and (1,0) -> indices 1 and 3
    REQUIRE(s.edge_cells == std::vector<long>{1, 3});
    REQUIRE_THROWS_AS(adaptive_sample(pop, net, 0.0, rng), std::domain_error);
}

TEST_CASE("sample artifact round-trips bit-exactly", "[design]") {
    const auto gen = small_population(21);
    RandomSource rng(21, 3);
    const auto s = adaptive_sample(gen.pop, gen.net, 0.2, rng);
    const auto j = to_json(s);
    const std::string text = j.dump(2);
    const auto s2 = sample_from_json(nlohmann::json::parse(text));
    REQUIRE(to_json(s2).dump(2) == text);
    REQUIRE(s2.m() == s.m());
    REQUIRE(s2.x_s() == s.x_s());
    REQUIRE(s2.ordered_sizes() == s.ordered_sizes());
}
