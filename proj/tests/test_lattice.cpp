// Box lattice: indexing, edge enumeration, boundary handling.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <map>
#include <set>
#include <vector>

#include "rcm/lattice.hpp"

using rcm::Boundary;
using rcm::BoxLattice;

namespace {

// Independent edge count: scan all ordered site pairs at taxicab distance 1,
// counting each unordered pair once; periodic wrap handled via coordinates.
std::int64_t brute_force_edge_count(const BoxLattice& lat) {
    std::int64_t count = 0;
    for (std::int32_t u = 0; u < lat.n_sites(); ++u) {
        for (int k = 0; k < lat.dim(); ++k) {
            if (lat.boundary() == Boundary::periodic) {
                count += 1; // every +axis step exists, parallel edges at L=2 included
            } else if (lat.coord(u, k) + 1 < lat.side()) {
                count += 1;
            }
        }
    }
    return count;
}

} // namespace

TEST_CASE("edge counts match direct enumeration", "[lattice]") {
    // Frozen small cases: 1-d ring of 4, 3x3 torus, 3x3 free box.
    CHECK(BoxLattice(1, 4, Boundary::periodic).n_edges() == 4);
    CHECK(BoxLattice(2, 3, Boundary::periodic).n_edges() == 18);
    CHECK(BoxLattice(2, 3, Boundary::free_box).n_edges() == 12);

    for (int d : {1, 2, 3}) {
        for (int L : {2, 3, 5}) {
            BoxLattice torus(d, L, Boundary::periodic);
            BoxLattice box(d, L, Boundary::free_box);
            CHECK(torus.n_edges() == brute_force_edge_count(torus));
            CHECK(box.n_edges() == brute_force_edge_count(box));
        }
    }
}

TEST_CASE("site and coordinate maps invert each other", "[lattice]") {
    BoxLattice lat(3, 4, Boundary::periodic);
    int c[BoxLattice::max_dim];
    for (std::int32_t s = 0; s < lat.n_sites(); ++s) {
        lat.site_coords(s, c);
        for (int k = 0; k < lat.dim(); ++k) {
            REQUIRE(c[k] >= 0);
            REQUIRE(c[k] < lat.side());
        }
        REQUIRE(lat.coords_site(c) == s);
    }
    // Origin is site 0.
    int zero[3] = {0, 0, 0};
    CHECK(lat.coords_site(zero) == 0);
}

TEST_CASE("edge decode/encode agree and cover each pair once", "[lattice]") {
    for (Boundary b : {Boundary::periodic, Boundary::free_box}) {
        BoxLattice lat(2, 5, b);
        std::set<std::pair<std::int32_t, std::int32_t>> seen;
        for (std::int64_t e = 0; e < lat.n_edges(); ++e) {
            rcm::Edge ed = lat.edge(e);
            REQUIRE(ed.v >= 0);
            REQUIRE(lat.edge_index(ed.u, ed.axis) == e);
            auto key = std::minmax(ed.u, ed.v);
            REQUIRE(seen.emplace(key.first, key.second).second);
        }
        // Every unordered nearest-neighbor pair shows up (L >= 3 so the
        // multigraph corner case is absent).
        std::int64_t pairs = 0;
        for (std::int32_t u = 0; u < lat.n_sites(); ++u)
            for (int k = 0; k < lat.dim(); ++k) {
                std::int32_t v = lat.neighbor(u, k, +1);
                if (v >= 0) ++pairs;
            }
        CHECK(static_cast<std::int64_t>(seen.size()) == pairs);
    }
}

TEST_CASE("periodic sites have exactly 2d incident edges, L=2 included", "[lattice]") {
    for (int L : {2, 3, 4}) {
        BoxLattice lat(2, L, Boundary::periodic);
        std::map<std::int32_t, int> incident;
        for (std::int64_t e = 0; e < lat.n_edges(); ++e) {
            rcm::Edge ed = lat.edge(e);
            incident[ed.u] += 1;
            incident[ed.v] += 1;
        }
        for (std::int32_t s = 0; s < lat.n_sites(); ++s) REQUIRE(incident[s] == 2 * lat.dim());
    }
}

TEST_CASE("neighbor stepping wraps on the torus and stops at free walls", "[lattice]") {
    BoxLattice torus(2, 4, Boundary::periodic);
    BoxLattice box(2, 4, Boundary::free_box);
    int corner[2] = {3, 0};
    std::int32_t s = torus.coords_site(corner);
    CHECK(torus.coord(torus.neighbor(s, 0, +1), 0) == 0); // wrap
    CHECK(box.neighbor(box.coords_site(corner), 0, +1) == -1);
    CHECK(box.neighbor(box.coords_site(corner), 1, -1) == -1);
    CHECK(box.neighbor(box.coords_site(corner), 0, -1) >= 0);
}

TEST_CASE("centered coordinates live in (-L/2, L/2]", "[lattice]") {
    BoxLattice even(1, 6, Boundary::periodic);
    std::vector<int> centered;
    for (int c = 0; c < 6; ++c) centered.push_back(even.centered(c));
    CHECK(centered == std::vector<int>{0, 1, 2, 3, -2, -1});

    BoxLattice odd(1, 5, Boundary::periodic);
    centered.clear();
    for (int c = 0; c < 5; ++c) centered.push_back(odd.centered(c));
    CHECK(centered == std::vector<int>{0, 1, 2, -2, -1});
}

TEST_CASE("minimal-image displacement is the shortest representative", "[lattice]") {
    BoxLattice lat(1, 8, Boundary::periodic);
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) {
            int m = lat.min_image(b - a);
            // Brute force over all representatives b - a + 8k.
            int best = 1000;
            for (int k = -2; k <= 2; ++k) {
                int r = b - a + 8 * k;
                if (std::abs(r) < std::abs(best)) best = r;
                // ties (|r| == L/2) resolve to the positive representative
                if (std::abs(r) == std::abs(best) && r > best) best = r;
            }
            REQUIRE(m == best);
        }
}

TEST_CASE("constructor rejects bad geometry", "[lattice]") {
    CHECK_THROWS_AS(BoxLattice(0, 4, Boundary::periodic), std::invalid_argument);
    CHECK_THROWS_AS(BoxLattice(1, 1, Boundary::periodic), std::invalid_argument);
    CHECK_THROWS_AS(BoxLattice(9, 4, Boundary::periodic), std::invalid_argument);
    CHECK_THROWS_AS(BoxLattice(4, 1024, Boundary::periodic), std::invalid_argument);
    CHECK_THROWS(rcm::boundary_from_name("moebius"));
}
