// Exact walk distributions, Poisson-mixed observation rows, Monte Carlo
// consistency, the rescaled return-probability curve, and diffusive ratios.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "rcm/cluster.hpp"
#include "rcm/field.hpp"
#include "rcm/heat_kernel.hpp"
#include "rcm/induced_kernel.hpp"
#include "rcm/rng.hpp"
#include "rcm/walk.hpp"

using rcm::Boundary;
using rcm::BoxLattice;
using rcm::ConductanceField;
using rcm::ConductanceLaw;
using rcm::InducedKernel;

namespace {

InducedKernel kernel_of(const ConductanceField& f, double alpha,
                        const rcm::InducedKernelOptions& opts = {}) {
    auto pos = rcm::label_clusters(f, 0.0);
    auto strong = rcm::label_clusters(f, alpha);
    return rcm::build_induced_kernel(f, pos, strong, opts);
}

} // namespace

TEST_CASE("two steps on the unit ring return with probability one half", "[heatkernel]") {
    BoxLattice lat(1, 4, Boundary::periodic);
    ConductanceField f(lat, std::vector<double>(4, 1.0));
    CHECK(rcm::x_return_probability_exact(f, 0, 2) == Catch::Approx(0.5).margin(1e-15));

    // Unit weights leave no laziness, so parity is strict: after two steps
    // the walker sits at 0 or at the antipode, each with mass one half.
    auto dist = rcm::x_distribution_exact(f, 0, 2);
    CHECK(dist[2] == Catch::Approx(0.5).margin(1e-15));
    CHECK(dist[1] == 0.0);
    CHECK(dist[3] == 0.0);
    CHECK(std::accumulate(dist.begin(), dist.end(), 0.0) == Catch::Approx(1.0).margin(1e-14));
    CHECK(rcm::x_return_probability_exact(f, 0, 1) == 0.0);
}

TEST_CASE("time zero observation is a point mass", "[heatkernel]") {
    BoxLattice lat(2, 6, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::mixture(0.7, 0.1, 0.5), 52);
    auto K = kernel_of(f, 0.5);
    REQUIRE(K.n() > 0);
    std::int32_t x = K.sites[0];
    auto row = rcm::y_row_exact(K, x, 0.0);
    for (std::size_t i = 0; i < row.size(); ++i) {
        double want = (static_cast<std::int32_t>(i) == K.site_index[x]) ? 1.0 : 0.0;
        CHECK(row[i] == want);
    }
    auto q = rcm::q_row_exact(K, x, 0.0);
    CHECK(q[static_cast<std::size_t>(K.site_index[x])] ==
          Catch::Approx(1.0 / (2.0 * K.dim)).margin(1e-15));
}

TEST_CASE("exact walk distribution matches Monte Carlo on a hundred-site box",
          "[heatkernel]") {
    BoxLattice lat(2, 10, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::uniform_open(), 17);
    const std::int32_t x0 = 44;
    const std::int64_t n = 12;
    double p = rcm::x_return_probability_exact(f, x0, n);
    REQUIRE(p > 0.0);

    auto eng = rcm::make_engine(9, 0);
    auto est = rcm::mc_return_probability(f, x0, n, 200000, eng);
    double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(est.trials));
    CHECK(std::abs(est.p_hat() - p) <= 3.0 * sigma);
}

TEST_CASE("exact observation row matches Monte Carlo visits", "[heatkernel]") {
    BoxLattice lat(2, 8, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::mixture(0.7, 0.1, 0.5), 3);
    auto K = kernel_of(f, 0.5);
    REQUIRE(K.n() >= 10);
    std::int32_t x0 = K.sites[0];
    const double t = 2.5;
    auto row = rcm::y_row_exact(K, x0, t);

    // The three heaviest targets carry enough mass for tight binomials.
    std::vector<std::size_t> order(row.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });

    const std::int64_t samples = 30000;
    std::vector<std::int64_t> hits(3, 0);
    auto eng = rcm::make_engine(31, 1);
    for (std::int64_t i = 0; i < samples; ++i) {
        auto path = rcm::sample_Y(K, x0, t, eng);
        std::int32_t yi = K.site_index[path.site_at(t)];
        for (int j = 0; j < 3; ++j)
            if (static_cast<std::size_t>(yi) == order[static_cast<std::size_t>(j)])
                ++hits[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < 3; ++j) {
        double p = row[order[static_cast<std::size_t>(j)]];
        double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
        double p_hat = static_cast<double>(hits[static_cast<std::size_t>(j)]) / samples;
        CHECK(std::abs(p_hat - p) <= 3.0 * sigma);
    }
}

TEST_CASE("observation rows sum to one and pair symmetrically", "[heatkernel]") {
    BoxLattice lat(2, 12, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::mixture(0.7, 0.1, 0.5), 21);
    auto K = kernel_of(f, 0.35);
    REQUIRE(K.n() >= 20);
    const double t = 3.0;

    std::vector<std::int32_t> picks;
    for (std::int64_t i = 0; i < K.n() && picks.size() < 5; i += K.n() / 5)
        picks.push_back(K.sites[static_cast<std::size_t>(i)]);

    std::vector<std::vector<double>> rows;
    for (std::int32_t x : picks) {
        rows.push_back(rcm::y_row_exact(K, x, t));
        double sum = std::accumulate(rows.back().begin(), rows.back().end(), 0.0);
        CHECK(std::abs(sum - 1.0) <= 1e-10);
        for (double v : rows.back()) CHECK(v >= 0.0);
    }
    // Reversibility with constant reference measure makes the density, and
    // hence the probability row, symmetric across each pair.
    for (std::size_t a = 0; a < picks.size(); ++a)
        for (std::size_t b = a + 1; b < picks.size(); ++b) {
            double xy = rows[a][static_cast<std::size_t>(K.site_index[picks[b]])];
            double yx = rows[b][static_cast<std::size_t>(K.site_index[picks[a]])];
            CHECK(std::abs(xy - yx) <= 1e-10);
        }
}

TEST_CASE("return masses dominate cross visits pairwise", "[heatkernel]") {
    BoxLattice lat(2, 10, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::mixture(0.75, 0.08, 0.5), 57);
    auto K = kernel_of(f, 0.5);
    REQUIRE(K.n() >= 12);
    const double t = 1.75;

    std::vector<std::int32_t> picks;
    for (std::int64_t i = 0; i < K.n() && picks.size() < 5; i += K.n() / 5)
        picks.push_back(K.sites[static_cast<std::size_t>(i)]);
    std::vector<std::vector<double>> rows;
    for (std::int32_t x : picks) rows.push_back(rcm::y_row_exact(K, x, t));

    for (std::size_t a = 0; a < picks.size(); ++a)
        for (std::size_t b = 0; b < picks.size(); ++b) {
            if (a == b) continue;
            double cross = rows[a][static_cast<std::size_t>(K.site_index[picks[b]])];
            double ret_a = rows[a][static_cast<std::size_t>(K.site_index[picks[a]])];
            double ret_b = rows[b][static_cast<std::size_t>(K.site_index[picks[b]])];
            CHECK(cross * cross <= ret_a * ret_b + 1e-12);
        }
}

TEST_CASE("rescaled returns approach the planar walk constant", "[heatkernel]") {
    // Unit weights in the plane: n P(X_2n = 0) tends to 1/pi from below, and
    // the box is large enough that wraparound mass is beyond double noise.
    BoxLattice lat(2, 40, Boundary::periodic);
    ConductanceField f(lat, std::vector<double>(static_cast<std::size_t>(lat.n_edges()), 1.0));
    double exact10 = 10.0 * rcm::x_return_probability_exact(f, 0, 20);
    double exact20 = 20.0 * rcm::x_return_probability_exact(f, 0, 40);
    CHECK(exact10 > 0.29);
    CHECK(exact10 < 0.33);
    CHECK(exact20 > exact10);
    CHECK(exact20 < 1.0 / 3.0 + 1e-3);

    auto proxy = rcm::label_clusters(f, 0.0);
    auto eng = rcm::make_engine(23, 0);
    auto curve = rcm::heat_lower_bound_curve(f, proxy, 0, {10, 20}, 150000, eng);
    REQUIRE(curve.value.size() == 2);
    CHECK_FALSE(curve.indistinguishable_from_zero);
    CHECK(std::abs(curve.value[0] - exact10) <= 3.0 * curve.std_error[0]);
    CHECK(std::abs(curve.value[1] - exact20) <= 3.0 * curve.std_error[1]);
}

TEST_CASE("no return at the largest n is an error, not a zero", "[heatkernel]") {
    BoxLattice lat(2, 40, Boundary::periodic);
    ConductanceField f(lat, std::vector<double>(static_cast<std::size_t>(lat.n_edges()), 1.0));
    auto proxy = rcm::label_clusters(f, 0.0);
    auto eng = rcm::make_engine(5, 2);
    CHECK_THROWS_AS(rcm::heat_lower_bound_curve(f, proxy, 0, {200}, 30, eng),
                    std::runtime_error);
}

TEST_CASE("disconnected origin is rejected by the curve", "[heatkernel]") {
    BoxLattice lat(1, 6, Boundary::free_box);
    ConductanceField f(lat, {0.0, 0.8, 0.8, 0.8, 0.8});
    auto proxy = rcm::label_clusters(f, 0.0);
    REQUIRE_FALSE(proxy.in_largest(0));
    auto eng = rcm::make_engine(1, 0);
    CHECK_THROWS_AS(rcm::heat_lower_bound_curve(f, proxy, 0, {4}, 100, eng),
                    std::invalid_argument);
}

TEST_CASE("two-state observation follows the closed form", "[heatkernel]") {
    // Two sites joined by both ring edges at unit weight: the jump chain
    // swaps deterministically, so P(Y_t = other) = (1 - e^{-2t}) / 2.
    BoxLattice lat(1, 2, Boundary::periodic);
    ConductanceField f(lat, {1.0, 1.0});
    auto K = kernel_of(f, 0.0);
    REQUIRE(K.n() == 2);
    for (double t : {0.3, 1.0, 2.0}) {
        auto row = rcm::y_row_exact(K, 0, t);
        double want = 0.5 * (1.0 - std::exp(-2.0 * t));
        CHECK(row[static_cast<std::size_t>(K.site_index[1])] ==
              Catch::Approx(want).margin(1e-12));
    }
}

TEST_CASE("diffusive ratios sit near the gaussian constants on a long ring",
          "[heatkernel]") {
    BoxLattice lat(1, 64, Boundary::periodic);
    ConductanceField f(lat, std::vector<double>(64, 1.0));
    auto K = kernel_of(f, 0.0);
    REQUIRE(K.n() == 64);

    // Exact references at t = 32 from the mixed row.
    const double t = 32.0;
    auto row = rcm::y_row_exact(K, 0, t);
    auto dist = rcm::markov_distances_from(K, 0);
    double exact_mean = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i)
        exact_mean += row[i] * static_cast<double>(dist[i]);
    double exact_ratio = exact_mean / std::sqrt(t);
    CHECK(std::abs(exact_ratio - std::sqrt(2.0 / M_PI)) < 0.05);
    double exact_return = std::sqrt(t) * row[static_cast<std::size_t>(K.site_index[0])];
    CHECK(std::abs(exact_return - std::sqrt(1.0 / (2.0 * M_PI))) < 0.05);

    auto eng = rcm::make_engine(77, 0);
    auto table = rcm::diffusive_bound_check(K, {0}, {32.0, 50.0}, 20000, eng);
    REQUIRE(table.t.size() == 2);
    CHECK(std::abs(table.graph_mean[0] - exact_ratio) <= 3.0 * table.graph_se[0]);
    // Ring hop distance and min-image euclidean length coincide in 1-d.
    CHECK(table.euclid_mean[0] == Catch::Approx(table.graph_mean[0]).margin(1e-12));
    CHECK(std::abs(table.return_mass[0] - exact_return) <= 3.0 * table.return_se[0] + 0.02);
    CHECK(table.sup_graph >= table.graph_mean[0]);
    CHECK(table.sup_return > 0.0);
}

TEST_CASE("times outside the diffusive window are rejected", "[heatkernel]") {
    BoxLattice lat(1, 64, Boundary::periodic);
    ConductanceField f(lat, std::vector<double>(64, 1.0));
    auto K = kernel_of(f, 0.0);
    auto eng = rcm::make_engine(2, 0);
    CHECK_THROWS_AS(rcm::diffusive_bound_check(K, {0}, {2.0}, 100, eng),
                    std::invalid_argument);
    CHECK_THROWS_AS(rcm::diffusive_bound_check(K, {0}, {32.0, 1030.0}, 100, eng),
                    std::invalid_argument);
}

TEST_CASE("windowed row reproduces the exact row when nothing clips", "[heatkernel]") {
    BoxLattice lat(2, 8, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::mixture(0.8, 0.1, 0.5), 41);
    auto K = kernel_of(f, 0.5);
    REQUIRE(K.n() >= 10);
    std::int32_t x0 = K.sites[static_cast<std::size_t>(K.n() / 2)];
    const double t = 2.0;
    auto exact = rcm::y_row_exact(K, x0, t);
    auto win = rcm::detail::y_row_windowed(K, x0, t);
    REQUIRE_FALSE(win.clipped);
    for (std::size_t i = 0; i < exact.size(); ++i)
        CHECK(win.prob[i] == Catch::Approx(exact[i]).margin(1e-14));

    // A tiny support cap clips; dropped mass only ever lowers entries.
    auto clipped = rcm::detail::y_row_windowed(K, x0, t, 1e-15, 4);
    CHECK(clipped.clipped);
    for (std::size_t i = 0; i < exact.size(); ++i)
        CHECK(clipped.prob[i] <= exact[i] + 1e-15);
}

TEST_CASE("exact methods reject bad inputs and oversized instances", "[heatkernel]") {
    BoxLattice small(1, 4, Boundary::periodic);
    ConductanceField f(small, std::vector<double>(4, 1.0));
    CHECK_THROWS_AS(rcm::x_distribution_exact(f, -1, 2), std::invalid_argument);
    CHECK_THROWS_AS(rcm::x_distribution_exact(f, 0, -2), std::invalid_argument);

    auto K = kernel_of(f, 0.0);
    CHECK_THROWS_AS(rcm::y_row_exact(K, 0, -0.5), std::invalid_argument);
    CHECK_THROWS_AS(rcm::y_row_exact(K, 0, 701.0), std::invalid_argument);

    BoxLattice big(2, 64, Boundary::periodic);
    ConductanceField g(big, std::vector<double>(static_cast<std::size_t>(big.n_edges()), 0.9));
    CHECK_THROWS_AS(rcm::x_distribution_exact(g, 0, 1), std::invalid_argument);
    auto KG = kernel_of(g, 0.0);
    CHECK_THROWS_AS(rcm::y_row_exact(KG, 0, 1.0), std::invalid_argument);

    // A weak-only site never enters the kernel.
    BoxLattice lat(2, 6, Boundary::periodic);
    auto h = rcm::sample_field(lat, ConductanceLaw::mixture(0.6, 0.2, 0.5), 11);
    auto KH = kernel_of(h, 0.5);
    std::int32_t outside = -1;
    for (std::int32_t s = 0; s < lat.n_sites(); ++s)
        if (KH.site_index[s] < 0) {
            outside = s;
            break;
        }
    if (outside >= 0)
        CHECK_THROWS_AS(rcm::y_row_exact(KH, outside, 1.0), std::invalid_argument);
}
