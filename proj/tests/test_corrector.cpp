// Corrector solves against closed forms and symmetry, harmonicity and
// cocycle identities, energy optimality, growth diagnostics, hole bounds.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rcm/cluster.hpp"
#include "rcm/corrector.hpp"
#include "rcm/induced_kernel.hpp"
#include "rcm/rng.hpp"

using rcm::Boundary;
using rcm::BoxLattice;
using rcm::ConductanceField;
using rcm::ConductanceLaw;
using rcm::CorrectorField;
using rcm::CorrectorOptions;

namespace {

double max_abs_chi(const CorrectorField& c) {
    double m = 0.0;
    for (double v : c.chi) m = std::max(m, std::abs(v));
    return m;
}

double max_diff(const CorrectorField& a, const CorrectorField& b) {
    REQUIRE(a.chi.size() == b.chi.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.chi.size(); ++i) m = std::max(m, std::abs(a.chi[i] - b.chi[i]));
    return m;
}

} // namespace

TEST_CASE("constant fields have a vanishing corrector", "[corrector]") {
    for (double cval : {0.3, 1.0}) {
        BoxLattice lat(2, 8, Boundary::periodic);
        ConductanceField f(lat, std::vector<double>(static_cast<std::size_t>(lat.n_edges()), cval));
        auto c = rcm::solve_corrector_periodic(f);
        CHECK(max_abs_chi(c) <= 1e-8);
        CHECK(c.achieved <= c.tolerance);
        CHECK(c.anchor == 0);
        CHECK(c.at(0)[0] == 0.0);
        CHECK(c.at(0)[1] == 0.0);
        CHECK(!c.multiple_components);
    }
}

TEST_CASE("two-site ring reproduces the hand corrector", "[corrector]") {
    // Multigraph ring: weights 0.5 and 1.0 between the two sites. The
    // normalizer is 1.5 and chi(1) = (1/1.5)(2 - 1.5) = 1/3.
    BoxLattice lat(1, 2, Boundary::periodic);
    ConductanceField f(lat, {0.5, 1.0});
    auto exact = rcm::corrector_1d_exact(f);
    CHECK(exact.chi[0] == 0.0);
    CHECK(exact.chi[1] == Catch::Approx(1.0 / 3.0).margin(1e-15));
    CHECK(exact.achieved <= 1e-12);

    auto solved = rcm::solve_corrector_periodic(f);
    CHECK(max_diff(exact, solved) <= 1e-8);
}

TEST_CASE("constant summand collapses the 1-d closed form", "[corrector]") {
    BoxLattice lat(1, 4, Boundary::periodic);
    ConductanceField f(lat, std::vector<double>(4, 0.5));
    auto exact = rcm::corrector_1d_exact(f);
    for (double v : exact.chi) CHECK(v == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("solver matches the 1-d closed form on sampled weights", "[corrector]") {
    BoxLattice lat(1, 8, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::uniform_open(), 4242);
    auto exact = rcm::corrector_1d_exact(f);
    auto solved = rcm::solve_corrector_periodic(f);
    CHECK(max_diff(exact, solved) <= 1e-8);
    CHECK(exact.achieved <= 1e-12); // closed form is harmonic to rounding
}

TEST_CASE("zero conductance is rejected by the closed form", "[corrector]") {
    BoxLattice lat(1, 4, Boundary::periodic);
    ConductanceField f(lat, {0.5, 0.0, 0.5, 1.0});
    CHECK_THROWS_AS(rcm::corrector_1d_exact(f), std::invalid_argument);
}

TEST_CASE("rotation-symmetric weights give a rotation-equivariant corrector", "[corrector]") {
    // Symmetrize a sampled field under the quarter turn about the origin,
    // R(x, y) = (-y, x) mod L; the minimizer must transform as a vector
    // field: chi_0(x) = chi_1(Rx) and chi_1(x) = -chi_0(Rx).
    const int L = 8;
    BoxLattice lat(2, L, Boundary::periodic);
    auto raw = rcm::sample_field(lat, ConductanceLaw::uniform_open(), 555);

    auto rot_site = [&](std::int32_t s) {
        int c[2] = {lat.coord(s, 0), lat.coord(s, 1)};
        int rc[2] = {(L - c[1]) % L, c[0]};
        return lat.coords_site(rc);
    };
    // Edge (u, 0): u -> u+e0 maps to Ru -> Ru+e1, the edge (Ru, 1).
    // Edge (u, 1): u -> u+e1 maps to Ru -> Ru-e0, the edge (Ru-e0, 0).
    auto rot_edge = [&](std::int64_t e) {
        rcm::Edge b = lat.edge(e);
        std::int32_t ru = rot_site(b.u);
        if (b.axis == 0) return lat.edge_index(ru, 1);
        return lat.edge_index(lat.neighbor(ru, 0, -1), 0);
    };
    std::vector<double> omega(static_cast<std::size_t>(lat.n_edges()));
    for (std::int64_t e = 0; e < lat.n_edges(); ++e) {
        // Orbit representative: smallest edge index under repeated rotation.
        std::int64_t canon = e, cur = e;
        for (int r = 0; r < 3; ++r) {
            cur = rot_edge(cur);
            canon = std::min(canon, cur);
        }
        omega[static_cast<std::size_t>(e)] = raw.omega()[static_cast<std::size_t>(canon)];
    }
    ConductanceField f(lat, omega);
    for (std::int64_t e = 0; e < lat.n_edges(); ++e) // symmetrization sanity
        REQUIRE(f.omega()[static_cast<std::size_t>(e)] ==
                f.omega()[static_cast<std::size_t>(rot_edge(e))]);

    auto c = rcm::solve_corrector_periodic(f);
    double worst = 0.0;
    for (std::int32_t s = 0; s < lat.n_sites(); ++s) {
        std::int32_t rs = rot_site(s);
        worst = std::max(worst, std::abs(c.at(s)[0] - c.at(rs)[1]));
        worst = std::max(worst, std::abs(c.at(s)[1] + c.at(rs)[0]));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("harmonic residual of the unsolved corrector is hand-computable", "[corrector]") {
    // chi = 0 on the alternating ring: residual (1/2)|0.5 - 1.0| everywhere.
    BoxLattice lat(1, 4, Boundary::periodic);
    ConductanceField f(lat, {0.5, 1.0, 0.5, 1.0});
    CorrectorField zero;
    zero.dim = 1;
    zero.in_domain.assign(4, 1);
    zero.chi.assign(4, 0.0);
    auto r = rcm::harmonic_residual(f, zero);
    CHECK(r.max == Catch::Approx(0.25).margin(1e-15));
    CHECK(r.mean == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("kernel residual coincides with the plain one on hole-free fields", "[corrector]") {
    BoxLattice lat(2, 6, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::uniform_open(), 88);
    auto c = rcm::solve_corrector_periodic(f);
    auto pos = rcm::label_clusters(f, 0.0);
    auto K = rcm::build_induced_kernel(f, pos, pos);
    auto plain = rcm::harmonic_residual(f, c);
    auto alpha = rcm::harmonic_residual_alpha(f, c, K);
    CHECK(alpha.max == Catch::Approx(plain.max).margin(1e-14));
    CHECK(alpha.mean == Catch::Approx(plain.mean).margin(1e-14));
}

TEST_CASE("harmonicity transfers through the induced kernel", "[corrector]") {
    BoxLattice lat(2, 12, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::mixture(0.7, 0.1, 0.5), 23);
    auto c = rcm::solve_corrector_periodic(f);
    auto pos = rcm::label_clusters(f, 0.0);
    auto strong = rcm::label_clusters(f, 0.5);
    auto K = rcm::build_induced_kernel(f, pos, strong);
    auto alpha = rcm::harmonic_residual_alpha(f, c, K);
    CHECK(alpha.max <= 10.0 * c.tolerance);
}

TEST_CASE("cocycle identity holds across environment shifts", "[corrector]") {
    BoxLattice lat(2, 16, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::uniform_open(), 99);
    auto c = rcm::solve_corrector_periodic(f);

    std::vector<std::pair<std::int32_t, std::int32_t>> pairs = {
        {37, 0},   // y = 0: shift is the identity, defect exactly 0
        {85, 85},  // x = y: both sides vanish
        {5, 200}, {118, 43}, {255, 7}, {64, 129},
    };
    double defect = rcm::cocycle_defect(f, c, pairs);
    CHECK(defect <= 1e-7);

    double identity_only = rcm::cocycle_defect(f, c, {{37, 0}});
    CHECK(identity_only == 0.0);
}

TEST_CASE("perturbing the minimizer raises the energy", "[corrector]") {
    BoxLattice lat(2, 8, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::uniform_open(), 61);
    CorrectorOptions opts;
    opts.tolerance = 1e-12; // push the gradient far below the probe size
    auto c = rcm::solve_corrector_periodic(f, opts);
    const double base = rcm::dirichlet_energy(f, c);
    for (std::int32_t s : {0, 13, 27, 40, 63})
        for (int k = 0; k < 2; ++k)
            for (double delta : {1e-3, -1e-3}) {
                auto probe = c;
                probe.chi[static_cast<std::size_t>(s) * 2 + k] += delta;
                CHECK(rcm::dirichlet_energy(f, probe) > base);
            }
}

TEST_CASE("initial guesses land on the same normalized solution", "[corrector]") {
    BoxLattice lat(2, 10, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::mixture(0.8, 0.1, 0.5), 19);
    auto plain = rcm::solve_corrector_periodic(f);

    std::vector<double> guess(static_cast<std::size_t>(lat.n_sites()) * 2);
    for (std::size_t i = 0; i < guess.size(); ++i)
        guess[i] = 0.5 * std::sin(0.37 * static_cast<double>(i)) + 2.0; // constant-rich start
    CorrectorOptions warm;
    warm.initial_guess = &guess;
    auto seeded = rcm::solve_corrector_periodic(f, warm);
    CHECK(max_diff(plain, seeded) <= 1e-7);

    // Same inputs, same bits.
    auto again = rcm::solve_corrector_periodic(f);
    CHECK(max_diff(plain, again) == 0.0);
}

TEST_CASE("chi increments cancel around plaquettes", "[corrector]") {
    BoxLattice lat(2, 8, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::mixture(0.7, 0.1, 0.5), 29);
    auto c = rcm::solve_corrector_periodic(f);
    CHECK(rcm::max_plaquette_defect(f, c) <= 1e-9);
}

TEST_CASE("sublinearity diagnostics on the vanishing corrector", "[corrector]") {
    BoxLattice lat(2, 8, Boundary::periodic);
    ConductanceField f(lat, std::vector<double>(static_cast<std::size_t>(lat.n_edges()), 0.8));
    auto c = rcm::solve_corrector_periodic(f);
    auto strong = rcm::label_clusters(f, 0.5);
    auto stats = rcm::sublinearity_stats(f, c, strong);
    REQUIRE(stats.n.size() == 5); // radii 0..4
    for (double r : stats.R) CHECK(r <= 1e-8);
    for (const auto& row : stats.density)
        for (double v : row) CHECK(v == 0.0);
    CHECK(stats.edge_energy_mean <= 1e-16);
    CHECK(stats.argmax_site[0] == 0);
}

TEST_CASE("sublinearity curve matches a brute-force scan in 1-d", "[corrector]") {
    BoxLattice lat(1, 8, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::uniform_open(), 7);
    auto c = rcm::corrector_1d_exact(f);
    auto strong = rcm::label_clusters(f, 0.0);
    auto stats = rcm::sublinearity_stats(f, c, strong);

    REQUIRE(stats.n.size() == 5);
    for (int n = 0; n <= 4; ++n) {
        double brute = 0.0;
        for (std::int32_t s = 0; s < 8; ++s)
            if (lat.linf_from_origin(s) <= n)
                brute = std::max(brute, std::abs(c.chi[static_cast<std::size_t>(s)]));
        CHECK(stats.R[static_cast<std::size_t>(n)] == Catch::Approx(brute).margin(1e-15));
        if (n > 0)
            CHECK(stats.R_over_n[static_cast<std::size_t>(n)] ==
                  Catch::Approx(brute / n).margin(1e-15));
    }

    // Edge energy: direct mean over the ring's edges.
    double acc = 0.0;
    for (std::int64_t e = 0; e < 8; ++e) {
        rcm::Edge b = lat.edge(e);
        double inc = c.chi[static_cast<std::size_t>(b.v)] - c.chi[static_cast<std::size_t>(b.u)];
        acc += f.omega()[static_cast<std::size_t>(e)] * inc * inc;
    }
    CHECK(stats.edge_energy_mean == Catch::Approx(acc / 8.0).margin(1e-15));

    // Contraction table covers n with 3n <= 4, a single row.
    REQUIRE(stats.contraction_n == std::vector<int>{1});
    CHECK(stats.contraction_defect[0] ==
          Catch::Approx(stats.R[1] - (0.1 * 1 + 0.5 * stats.R[3])).margin(1e-15));
}

TEST_CASE("densities count chi exceedances", "[corrector]") {
    BoxLattice lat(2, 8, Boundary::periodic);
    auto f = rcm::sample_field(lat, ConductanceLaw::uniform_open(), 31);
    auto c = rcm::solve_corrector_periodic(f);
    auto strong = rcm::label_clusters(f, 0.0);
    rcm::SublinearityOptions opts;
    opts.eps = {0.01, 0.05};
    auto stats = rcm::sublinearity_stats(f, c, strong, opts);
    for (int n = 1; n <= 4; ++n)
        for (std::size_t j = 0; j < opts.eps.size(); ++j) {
            std::int64_t count = 0;
            for (std::int32_t s = 0; s < lat.n_sites(); ++s)
                if (lat.linf_from_origin(s) <= n && c.norm_at(s) >= opts.eps[j] * n) ++count;
            CHECK(stats.density[static_cast<std::size_t>(n)][j] ==
                  Catch::Approx(static_cast<double>(count) / (n * n)).margin(1e-15));
        }
}

TEST_CASE("hole interiors respect the boundary-plus-drift bound", "[corrector]") {
    // Pendant one-site hole on the 4x4 torus, as in the cluster tests.
    BoxLattice lat(2, 4, Boundary::periodic);
    std::vector<double> omega(static_cast<std::size_t>(lat.n_edges()), 0.9);
    int hc[2] = {2, 2};
    std::int32_t h = lat.coords_site(hc);
    for (int k = 0; k < 2; ++k) {
        omega[static_cast<std::size_t>(lat.edge_index(h, k))] = 0.0;
        omega[static_cast<std::size_t>(lat.edge_index(lat.neighbor(h, k, -1), k))] = 0.0;
    }
    std::int32_t left = lat.neighbor(h, 0, -1);
    omega[static_cast<std::size_t>(lat.edge_index(left, 0))] = 0.1;
    ConductanceField f(lat, omega);
    auto c = rcm::solve_corrector_periodic(f);
    auto pos = rcm::label_clusters(f, 0.0);
    auto strong = rcm::label_clusters(f, 0.5);
    auto holes = rcm::hole_components(f, pos, strong);
    REQUIRE(holes.size() == 1);
    auto bound = rcm::hole_max_principle(f, c, holes);
    CHECK(bound.slack[0] == Catch::Approx(1.0));
    CHECK(bound.inside_max[0] <= bound.boundary_max[0] + bound.slack[0]);
    CHECK(bound.worst_defect <= 0.0);

    // A three-site stretch: slack is the longest exit displacement.
    BoxLattice ring(1, 8, Boundary::periodic);
    ConductanceField g(ring, {0.1, 0.1, 0.9, 0.9, 0.9, 0.9, 0.1, 0.1});
    auto cg = rcm::solve_corrector_periodic(g);
    auto gpos = rcm::label_clusters(g, 0.0);
    auto gstrong = rcm::label_clusters(g, 0.5);
    auto gholes = rcm::hole_components(g, gpos, gstrong);
    REQUIRE(gholes.size() == 1);
    REQUIRE(gholes[0].sites == std::vector<std::int32_t>{0, 1, 7});
    auto gb = rcm::hole_max_principle(g, cg, gholes);
    CHECK(gb.slack[0] == Catch::Approx(3.0));
    CHECK(gb.worst_defect < 0.0); // strict slack on this instance

    // Hole-free: vacuous zero.
    ConductanceField full(ring, std::vector<double>(8, 0.9));
    auto cf = rcm::solve_corrector_periodic(full);
    auto none = rcm::hole_max_principle(full, cf, {});
    CHECK(none.worst_defect == 0.0);
    CHECK(none.worst_hole == -1);
}

TEST_CASE("solver flags disconnected weight and rejects bad input", "[corrector]") {
    // Vertical edges all zero: six disjoint horizontal rings.
    BoxLattice lat(2, 6, Boundary::periodic);
    std::vector<double> omega(static_cast<std::size_t>(lat.n_edges()), 0.0);
    for (std::int32_t s = 0; s < lat.n_sites(); ++s)
        omega[static_cast<std::size_t>(lat.edge_index(s, 0))] = 0.5;
    ConductanceField f(lat, omega);
    auto c = rcm::solve_corrector_periodic(f);
    CHECK(c.multiple_components);
    std::int64_t domain = 0;
    for (auto v : c.in_domain) domain += v;
    CHECK(domain == 6); // one ring, ties break to the one holding site 0

    BoxLattice freebox(2, 6, Boundary::free_box);
    ConductanceField g(freebox,
                       std::vector<double>(static_cast<std::size_t>(freebox.n_edges()), 0.5));
    CHECK_THROWS_AS(rcm::solve_corrector_periodic(g), std::invalid_argument);

    ConductanceField dead(lat, std::vector<double>(static_cast<std::size_t>(lat.n_edges()), 0.0));
    CHECK_THROWS_AS(rcm::solve_corrector_periodic(dead), std::invalid_argument);

    CorrectorOptions starved;
    starved.max_iterations = 1;
    BoxLattice big(2, 12, Boundary::periodic);
    auto hard = rcm::sample_field(big, ConductanceLaw::uniform_open(), 3);
    CHECK_THROWS_AS(rcm::solve_corrector_periodic(hard, starved), std::runtime_error);

    CorrectorOptions bad;
    bad.tolerance = 0.0;
    CHECK_THROWS_AS(rcm::solve_corrector_periodic(f, bad), std::invalid_argument);
}
