#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rarepop/diagnose.hpp"
#include "rarepop/dists.hpp"
#include "rarepop/rng.hpp"

using namespace rarepop;

TEST_CASE("geweke score is standard normal on stationary series", "[diagnose]") {
    // null-distribution simulation: i.i.d. normals rarely exceed |z| = 3
    long extreme = 0;
    const int seeds = 200;
    for (int s = 0; s < seeds; ++s) {
        RandomSource rng(1000 + static_cast<std::uint64_t>(s));
        std::vector<double> xs(10000);
        for (auto& x : xs) x = normal_sample(rng);
        if (std::abs(geweke_z(xs)) >= 3.0) ++extreme;
    }
    REQUIRE(static_cast<double>(extreme) / seeds <= 0.01);

    // designed failure: +10 sigma shift on the second half
    RandomSource rng(7);
    std::vector<double> xs(10000);
    for (std::size_t i = 0; i < xs.size(); ++i)
        xs[i] = normal_sample(rng) + (i >= 5000 ? 10.0 : 0.0);
    REQUIRE(std::abs(geweke_z(xs)) > 3.0);
}

TEST_CASE("geweke score is affine invariant", "[diagnose]") {
    RandomSource rng(21);
    std::vector<double> xs(5000);
    for (std::size_t i = 0; i < xs.size(); ++i)
        xs[i] = normal_sample(rng) + 0.3 * std::sin(static_cast<double>(i) / 200.0);
    std::vector<double> ys(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = -4.2 * xs[i] + 17.0;
    REQUIRE(geweke_z(ys) == Approx(-geweke_z(xs)).margin(1e-10));
    std::vector<double> zs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) zs[i] = 2.5 * xs[i] - 3.0;
    REQUIRE(geweke_z(zs) == Approx(geweke_z(xs)).margin(1e-10));
}

TEST_CASE("geweke rejects degenerate input", "[diagnose]") {
    std::vector<double> flat(1000, 2.0);
    REQUIRE_THROWS_AS(geweke_z(flat), std::domain_error);
    std::vector<double> tiny(30, 0.0);
    REQUIRE_THROWS_AS(geweke_z(tiny), std::domain_error);  // windows below 10 draws
    std::vector<double> xs(1000, 0.0);
    REQUIRE_THROWS_AS(geweke_z(xs, 0.6, 0.6), std::domain_error);  // overlap
}

TEST_CASE("raftery-lewis run lengths", "[diagnose]") {
    // i.i.d. series: dependence factor near one
    RandomSource rng(3);
    std::vector<double> xs(20000);
    for (auto& x : xs) x = rng.uniform();
    const auto iid = raftery_lewis(xs);
    REQUIRE(iid.n_min == 3746);  // ceil(1.959964^2 * 0.025 * 0.975 / 0.005^2)
    REQUIRE(iid.dependence_factor < 1.5);

    // sticky chain: persist with probability 0.99
    std::vector<double> sticky(20000);
    sticky[0] = rng.uniform();
    for (std::size_t i = 1; i < sticky.size(); ++i)
        sticky[i] = rng.uniform() < 0.99 ? sticky[i - 1] : rng.uniform();
    REQUIRE(raftery_lewis(sticky).dependence_factor > 5.0);

    std::vector<double> shorty(100);
    for (auto& x : shorty) x = rng.uniform();
    REQUIRE_THROWS_WITH(raftery_lewis(shorty), Catch::Contains("insufficient"));
}

TEST_CASE("hpd interval is the shortest window", "[diagnose]") {
    std::vector<double> grid(100);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i + 1);
    const auto h = hpd(grid, 0.95);
    REQUIRE(h.width() == Approx(94.0));
    REQUIRE(h.contains(50.0));

    std::vector<double> flat(50, 3.25);
    const auto h0 = hpd(flat, 0.9);
    REQUIRE(h0.width() == 0.0);
    REQUIRE(h0.lower == 3.25);

    // exhaustive-scan oracle on skewed samples
    RandomSource rng(5);
    std::vector<double> xs(2000);
    for (auto& x : xs) x = gamma_sample({2.0, 1.0}, rng);
    const auto hg = hpd(xs, 0.9);
    std::sort(xs.begin(), xs.end());
    const auto w = static_cast<std::size_t>(std::ceil(0.9 * xs.size()));
    long inside = 0;
    for (std::size_t i = 0; i + w <= xs.size(); ++i)
        REQUIRE(xs[i + w - 1] - xs[i] >= hg.width() - 1e-12);
    for (double x : xs) inside += hg.contains(x) ? 1 : 0;
    REQUIRE(inside >= static_cast<long>(w));

    // symmetric unimodal: interval roughly symmetric about the mode
    std::vector<double> norm(20000);
    for (auto& x : norm) x = normal_sample(rng);
    const auto hn = hpd(norm, 0.95);
    REQUIRE(std::abs(hn.lower + hn.upper) < 0.15);

    REQUIRE_THROWS_AS(hpd(std::vector<double>(10, 1.0), 0.5), std::domain_error);
    REQUIRE_THROWS_AS(hpd(grid, 1.0), std::domain_error);
}

TEST_CASE("replication summaries", "[diagnose]") {
    const double truth = 500.0;
    std::vector<ReplicationRecord> recs{{truth, 1.1 * truth, {400.0, 700.0, 0.95}},
                                        {truth, 0.9 * truth, {450.0, 650.0, 0.95}}};
    const auto s = summarize_replications(recs, true);
    REQUIRE(s.rmse == Approx(0.01).margin(1e-12));
    REQUIRE(s.rae == Approx(0.1).margin(1e-12));
    REQUIRE(s.coverage == Approx(100.0));
    REQUIRE(s.width == Approx(0.5 * (300.0 + 200.0) / truth).margin(1e-12));
    REQUIRE_FALSE(s.efficiency.has_value());

    // permutation invariance
    std::vector<ReplicationRecord> shuffled{recs[1], recs[0]};
    const auto s2 = summarize_replications(shuffled, true);
    REQUIRE(s2.rmse == s.rmse);
    REQUIRE(s2.rae == s.rae);
    REQUIRE(s2.coverage == s.coverage);
    REQUIRE(s2.width == s.width);

    // efficiency against a comparator variance
    const auto s3 = summarize_replications(recs, true, 10000.0);
    REQUIRE(s3.efficiency.has_value());
    // estimates 550 and 450: variance (50^2 + 50^2) / (2 - 1) = 5000
    REQUIRE(*s3.efficiency == Approx(0.5).epsilon(1e-9));

    std::vector<ReplicationRecord> bad{{0.0, 1.0, {0.0, 1.0, 0.95}},
                                       {1.0, 1.0, {0.0, 1.0, 0.95}}};
    REQUIRE_THROWS_AS(summarize_replications(bad, true), std::domain_error);
    REQUIRE_THROWS_AS(summarize_replications(std::vector<ReplicationRecord>{recs[0]}, true),
                      std::domain_error);
}
