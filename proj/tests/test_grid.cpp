#include <catch2/catch.hpp>

#include <map>
#include <set>
#include <sstream>

#include "rarepop/grid.hpp"
#include "support/stats_utils.hpp"

using namespace rarepop;

namespace {

GridPopulation make_pop(long rows, long cols, const std::map<std::pair<long, long>, long>& cells) {
    GridPopulation pop;
    pop.rows = rows;
    pop.cols = cols;
    pop.counts.assign(static_cast<std::size_t>(rows * cols), 0);
    for (const auto& [rc, v] : cells) pop.at(rc.first, rc.second) = v;
    return pop;
}

}  // namespace

TEST_CASE("network extraction on hand grids", "[grid]") {
    // diagonal cells are not rook-adjacent
    auto pop = make_pop(3, 3, {{{0, 0}, 2}, {{2, 2}, 1}});
    auto net = extract_networks(pop);
    REQUIRE(net.r_networks == 2);
    REQUIRE(net.cells_per_network == std::vector<long>{1, 1});
    REQUIRE(net.x_nonempty == 2);

    // edge-adjacent cells merge
    pop = make_pop(3, 3, {{{0, 0}, 2}, {{0, 1}, 1}});
    net = extract_networks(pop);
    REQUIRE(net.r_networks == 1);
    REQUIRE(net.cells_per_network == std::vector<long>{2});

    // full grid is a single component
    pop = make_pop(4, 5, {});
    for (auto& c : pop.counts) c = 3;
    net = extract_networks(pop);
    REQUIRE(net.r_networks == 1);
    REQUIRE(net.cells_per_network == std::vector<long>{20});
    REQUIRE(net.x_nonempty == 20);
    REQUIRE(net.z_sizes(20) == std::vector<long>{20});

    // all-empty grid is outside the model
    pop = make_pop(2, 2, {});
    REQUIRE_THROWS_AS(extract_networks(pop), std::domain_error);
}

TEST_CASE("population total", "[grid]") {
    auto pop = make_pop(3, 3, {{{1, 2}, 7}});
    REQUIRE(population_total(pop) == 7);
}

TEST_CASE("generation reproduces its own network structure", "[grid]") {
    RandomSource rng(2024);
    PopulationSpec spec;
    spec.rows = 20;
    spec.cols = 20;
    spec.alpha = 0.15;
    spec.beta = 0.10;
    spec.lambda_gen = GammaParam{1.1, 0.13};
    for (int rep = 0; rep < 1000; ++rep) {
        const auto gen = generate_population(spec, rng);
        const auto net = extract_networks(gen.pop);
        REQUIRE(net.x_nonempty == gen.net.x_nonempty);
        REQUIRE(net.r_networks == gen.net.r_networks);
        auto a = net.cells_per_network;
        auto b = gen.net.cells_per_network;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        REQUIRE(a == b);
        // identical partitions: cells grouped the same way under both labelings
        std::map<long, std::set<long>> by_gen, by_ext;
        for (long i = 0; i < gen.pop.n_cells(); ++i) {
            if (gen.net.membership[static_cast<std::size_t>(i)] >= 0)
                by_gen[gen.net.membership[static_cast<std::size_t>(i)]].insert(i);
            if (net.membership[static_cast<std::size_t>(i)] >= 0)
                by_ext[net.membership[static_cast<std::size_t>(i)]].insert(i);
        }
        std::set<std::set<long>> parts_gen, parts_ext;
        for (auto& [l, cells] : by_gen) parts_gen.insert(cells);
        for (auto& [l, cells] : by_ext) parts_ext.insert(cells);
        REQUIRE(parts_gen == parts_ext);
        // invariants: sum C = X, lambda ascending
        long sum_c = 0;
        for (long c : gen.net.cells_per_network) sum_c += c;
        REQUIRE(sum_c == gen.net.x_nonempty);
        for (std::size_t j = 1; j < gen.lambda.size(); ++j)
            REQUIRE(gen.lambda[j - 1] <= gen.lambda[j]);
    }
}

TEST_CASE("generated X follows the truncated binomial", "[grid]") {
    RandomSource rng(99);
    PopulationSpec spec;
    spec.rows = 5;
    spec.cols = 10;
    spec.alpha = 0.15;
    spec.beta = 0.10;
    const long n = 50;
    const int reps = 10000;
    std::vector<long> hist(static_cast<std::size_t>(n) + 1, 0);
    for (int rep = 0; rep < reps; ++rep) {
        const auto gen = generate_population(spec, rng);
        hist[static_cast<std::size_t>(gen.net.x_nonempty)] += 1;
    }
    // chi-square goodness of fit against the pmf, pooling tails to >= 5 expected
    std::vector<double> expected(hist.size(), 0.0);
    for (long k = 1; k <= n; ++k)
        expected[static_cast<std::size_t>(k)] =
            reps * std::exp(trunc_binomial_logpmf(k, n, spec.alpha));
    double stat = 0.0;
    long df = -1;
    double obs_pool = 0.0, exp_pool = 0.0;
    for (long k = 1; k <= n; ++k) {
        obs_pool += static_cast<double>(hist[static_cast<std::size_t>(k)]);
        exp_pool += expected[static_cast<std::size_t>(k)];
        if (exp_pool >= 5.0 && (reps - exp_pool) >= 5.0) {
            stat += (obs_pool - exp_pool) * (obs_pool - exp_pool) / exp_pool;
            obs_pool = exp_pool = 0.0;
            ++df;
        }
    }
    if (exp_pool > 0.0) {
        stat += (obs_pool - exp_pool) * (obs_pool - exp_pool) / exp_pool;
        ++df;
    }
    REQUIRE(df >= 3);
    REQUIRE(testsupport::chi_square_pvalue(stat, static_cast<double>(df)) > 0.001);
}

TEST_CASE("generated means match truncated binomial oracles", "[grid]") {
    RandomSource rng(7);
    PopulationSpec spec;
    spec.rows = 20;
    spec.cols = 20;
    spec.alpha = 0.15;
    spec.beta = 0.10;
    const int reps = 400;
    double sum_x = 0.0, sum_r = 0.0, sum_r_oracle = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
        const auto gen = generate_population(spec, rng);
        sum_x += static_cast<double>(gen.net.x_nonempty);
        sum_r += static_cast<double>(gen.net.r_networks);
        sum_r_oracle += trunc_binomial_mean(gen.net.x_nonempty, spec.beta);
    }
    const double ex = trunc_binomial_mean(400, spec.alpha);  // ~ 60
    REQUIRE(ex == Approx(60.0).margin(0.01));
    // sd of X is about 7.1, so a 4-sigma band around the oracle mean
    REQUIRE(sum_x / reps == Approx(ex).margin(4.0 * 7.2 / std::sqrt(double(reps))));
    REQUIRE(sum_r / reps == Approx(sum_r_oracle / reps).margin(0.5));
}

TEST_CASE("constant-rate generation puts about lambda counts per cell", "[grid]") {
    RandomSource rng(31);
    PopulationSpec spec;
    spec.rows = 20;
    spec.cols = 20;
    spec.lambda_gen = 10.0;
    double ratio_sum = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const auto gen = generate_population(spec, rng);
        ratio_sum += static_cast<double>(population_total(gen.pop)) /
                     static_cast<double>(gen.net.x_nonempty);
    }
    const double mean_ratio = ratio_sum / 100.0;
    REQUIRE(mean_ratio > 9.5);
    REQUIRE(mean_ratio < 10.6);
}

TEST_CASE("fixed lambda vector conditions the network count", "[grid]") {
    RandomSource rng(17);
    PopulationSpec spec;
    spec.rows = 20;
    spec.cols = 20;
    spec.lambda_gen = std::vector<double>{4.5, 4.8, 8.0, 11.3, 13.8};
    for (int rep = 0; rep < 20; ++rep) {
        const auto gen = generate_population(spec, rng);
        REQUIRE(gen.net.r_networks == 5);
        REQUIRE(gen.lambda == std::vector<double>{4.5, 4.8, 8.0, 11.3, 13.8});
    }
}

TEST_CASE("non-empty fraction grows with alpha", "[grid]") {
    RandomSource rng(12);
    double mean_sparse = 0.0, mean_dense = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        PopulationSpec spec;
        spec.rows = 10;
        spec.cols = 10;
        spec.beta = 0.10;
        spec.alpha = 0.05;
        mean_sparse += static_cast<double>(generate_population(spec, rng).net.x_nonempty);
        spec.alpha = 0.25;
        mean_dense += static_cast<double>(generate_population(spec, rng).net.x_nonempty);
    }
    REQUIRE(mean_sparse < mean_dense);
}

TEST_CASE("grid file ingestion", "[grid]") {
    {
        std::istringstream in("0,0,5\n");
        const auto pop = ingest_grid(in, 1, 1, "one.csv");
        REQUIRE(population_total(pop) == 5);
    }
    {
        std::istringstream in("# nothing here\n");
        REQUIRE_THROWS_AS(ingest_grid(in, 2, 2, "empty.csv"), std::domain_error);
    }
    {
        std::ostringstream body;
        for (long r = 0; r < 10; ++r)
            for (long c = 0; c < 20; ++c) body << r << ',' << c << ',' << (r + c) % 3 << '\n';
        std::istringstream in(body.str());
        const auto pop = ingest_grid(in, 10, 20, "teal.csv");
        REQUIRE(pop.n_cells() == 200);
    }
    {
        std::istringstream in("0,0,1\n0,0,2\n");
        REQUIRE_THROWS_WITH(ingest_grid(in, 2, 2, "dup.csv"),
                            Catch::Contains("dup.csv:2") && Catch::Contains("duplicate"));
    }
    {
        std::istringstream in("0,0,1\n5,0,2\n");
        REQUIRE_THROWS_WITH(ingest_grid(in, 2, 2, "oob.csv"), Catch::Contains("oob.csv:2"));
    }
    {
        std::istringstream in("0,0,-3\n");
        REQUIRE_THROWS_WITH(ingest_grid(in, 2, 2, "neg.csv"),
                            Catch::Contains("neg.csv:1") && Catch::Contains("negative"));
    }
    {
        std::istringstream in("0 0 1\n");
        REQUIRE_THROWS_AS(ingest_grid(in, 2, 2, "bad.csv"), ParseError);
    }
}

TEST_CASE("grid file round-trips bit-exactly", "[grid]") {
    RandomSource rng(55);
    PopulationSpec spec;
    spec.rows = 8;
    spec.cols = 9;
    const auto gen = generate_population(spec, rng);
    std::ostringstream first;
    write_grid(first, gen.pop);
    std::istringstream in(first.str());
    const auto back = ingest_grid(in, 8, 9, "rt.csv");
    REQUIRE(back.counts == gen.pop.counts);
    REQUIRE(population_total(back) == population_total(gen.pop));
    std::ostringstream second;
    write_grid(second, back);
    REQUIRE(second.str() == first.str());
}
