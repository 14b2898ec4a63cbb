// Block-scale regularity events on the positive-edge graph.
//
// For a block coordinate x (block units) and block scale L, write
// base = L*x. The block is B = base + [0,L]^d (closed, (L+1)^d sites) and
// the enlarged block is B~ = base + [-L,2L]^d. The event has three parts:
//   crossings:  each of the 2d adjacent blocks carries an occupied crossing
//               from the face it shares with B to its opposite face, using
//               only edges inside that block;
//   uniqueness: at most one occupied cluster of B~ (edges with both endpoints
//               in B~) meets both B and the surface of B~, so any two
//               occupied paths from B to the surface join up inside B~;
//   weak_free:  no edge inside B~ carries a weight in (0, alpha).
// The first two make the plain event; all three make the alpha version.
//
// The field must be free-boundary and large enough that B~ fits; block
// events are a finite-window probe, so periodic wrap-around would let a
// crossing leak through the seam.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rcm/field.hpp"

namespace rcm {

struct GoodBlockResult {
    bool crossings = false;
    bool unique_crossing_cluster = false;
    bool weak_free = false;
    bool good() const { return crossings && unique_crossing_cluster; }
    bool good_alpha() const { return good() && weak_free; }
};

namespace detail {

// Dense index over an inclusive coordinate box [lo, hi]^d.
struct SubBox {
    const BoxLattice* lat;
    int lo[BoxLattice::max_dim];
    int hi[BoxLattice::max_dim];
    std::int64_t size = 1;

    SubBox(const BoxLattice& l, const int* lo_in, const int* hi_in) : lat(&l) {
        for (int k = 0; k < l.dim(); ++k) {
            lo[k] = lo_in[k];
            hi[k] = hi_in[k];
            size *= hi[k] - lo[k] + 1;
        }
    }
    bool contains_site(std::int32_t s) const {
        for (int k = 0; k < lat->dim(); ++k) {
            int c = lat->coord(s, k);
            if (c < lo[k] || c > hi[k]) return false;
        }
        return true;
    }
    std::int64_t local(std::int32_t s) const {
        std::int64_t idx = 0, mult = 1;
        for (int k = 0; k < lat->dim(); ++k) {
            idx += static_cast<std::int64_t>(lat->coord(s, k) - lo[k]) * mult;
            mult *= hi[k] - lo[k] + 1;
        }
        return idx;
    }
    std::int32_t global(std::int64_t idx) const {
        int c[BoxLattice::max_dim];
        for (int k = 0; k < lat->dim(); ++k) {
            int span = hi[k] - lo[k] + 1;
            c[k] = lo[k] + static_cast<int>(idx % span);
            idx /= span;
        }
        return lat->coords_site(c);
    }
};

} // namespace detail

inline GoodBlockResult good_block_event(const ConductanceField& f, const int* block, int L,
                                        double alpha) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    if (lat.boundary() == Boundary::periodic)
        throw std::invalid_argument("good_block_event: needs a free-boundary field");
    if (L < 1) throw std::invalid_argument("good_block_event: block scale must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("good_block_event: alpha must lie in [0,1]");
    // alpha == 0 leaves no room for weak edges, so weak_free is vacuously
    // true and good_alpha() collapses to good().
    int base[BoxLattice::max_dim];
    for (int k = 0; k < d; ++k) {
        base[k] = L * block[k];
        if (base[k] - L < 0 || base[k] + 2 * L > lat.side() - 1)
            throw std::invalid_argument(
                "good_block_event: enlarged block leaves the field (need side >= 3L+1 and an "
                "interior block coordinate)");
    }

    GoodBlockResult res;

    // Occupied BFS inside a sub-box from a seed face; returns true when any
    // site with coordinate target_c along axis is reached.
    auto crosses = [&](const detail::SubBox& box, int axis, int seed_c, int target_c) {
        std::vector<std::uint8_t> seen(static_cast<std::size_t>(box.size), 0);
        std::vector<std::int32_t> stack;
        for (std::int64_t i = 0; i < box.size; ++i) {
            std::int32_t s = box.global(i);
            if (lat.coord(s, axis) == seed_c) {
                seen[static_cast<std::size_t>(i)] = 1;
                stack.push_back(s);
            }
        }
        while (!stack.empty()) {
            std::int32_t s = stack.back();
            stack.pop_back();
            if (lat.coord(s, axis) == target_c) return true;
            for (int q = 0; q < f.slots(); ++q) {
                if (f.weight_at(s, q) <= 0.0) continue;
                std::int32_t v = f.neighbor_at(s, q);
                if (v < 0 || !box.contains_site(v)) continue;
                std::int64_t lv = box.local(v);
                if (seen[static_cast<std::size_t>(lv)]) continue;
                seen[static_cast<std::size_t>(lv)] = 1;
                stack.push_back(v);
            }
        }
        return false;
    };

    // Condition (1): side-to-side crossings of all 2d adjacent blocks.
    res.crossings = true;
    for (int k = 0; k < d && res.crossings; ++k) {
        for (int dir : {+1, -1}) {
            int lo[BoxLattice::max_dim], hi[BoxLattice::max_dim];
            for (int m = 0; m < d; ++m) {
                lo[m] = base[m];
                hi[m] = base[m] + L;
            }
            if (dir > 0) {
                lo[k] = base[k] + L;
                hi[k] = base[k] + 2 * L;
            } else {
                lo[k] = base[k] - L;
                hi[k] = base[k];
            }
            detail::SubBox nb(lat, lo, hi);
            int shared = dir > 0 ? lo[k] : hi[k];
            int opposite = dir > 0 ? hi[k] : lo[k];
            if (!crosses(nb, k, shared, opposite)) {
                res.crossings = false;
                break;
            }
        }
    }

    // Condition (2): clusters of B~ meeting both B and the surface of B~.
    int lo3[BoxLattice::max_dim], hi3[BoxLattice::max_dim];
    for (int k = 0; k < d; ++k) {
        lo3[k] = base[k] - L;
        hi3[k] = base[k] + 2 * L;
    }
    detail::SubBox big(lat, lo3, hi3);
    auto in_core = [&](std::int32_t s) {
        for (int k = 0; k < d; ++k) {
            int c = lat.coord(s, k);
            if (c < base[k] || c > base[k] + L) return false;
        }
        return true;
    };
    auto on_surface = [&](std::int32_t s) {
        for (int k = 0; k < d; ++k) {
            int c = lat.coord(s, k);
            if (c == lo3[k] || c == hi3[k]) return true;
        }
        return false;
    };
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(big.size), 0);
    std::vector<std::int32_t> stack;
    int qualifying_clusters = 0;
    for (std::int64_t i0 = 0; i0 < big.size; ++i0) {
        if (seen[static_cast<std::size_t>(i0)]) continue;
        std::int32_t s0 = big.global(i0);
        seen[static_cast<std::size_t>(i0)] = 1;
        stack.assign(1, s0);
        bool meets_core = false, meets_surface = false;
        while (!stack.empty()) {
            std::int32_t s = stack.back();
            stack.pop_back();
            meets_core = meets_core || in_core(s);
            meets_surface = meets_surface || on_surface(s);
            for (int q = 0; q < f.slots(); ++q) {
                if (f.weight_at(s, q) <= 0.0) continue;
                std::int32_t v = f.neighbor_at(s, q);
                if (v < 0 || !big.contains_site(v)) continue;
                std::int64_t lv = big.local(v);
                if (seen[static_cast<std::size_t>(lv)]) continue;
                seen[static_cast<std::size_t>(lv)] = 1;
                stack.push_back(v);
            }
        }
        if (meets_core && meets_surface) ++qualifying_clusters;
    }
    res.unique_crossing_cluster = qualifying_clusters <= 1;

    // Weak-edge scan over B~.
    res.weak_free = true;
    for (std::int64_t i = 0; i < big.size && res.weak_free; ++i) {
        std::int32_t s = big.global(i);
        for (int k = 0; k < d; ++k) {
            std::int32_t v = lat.neighbor(s, k, +1);
            if (v < 0 || !big.contains_site(v)) continue;
            double w = f.omega_at(lat.edge_index(s, k));
            if (w > 0.0 && w < alpha) {
                res.weak_free = false;
                break;
            }
        }
    }
    return res;
}

} // namespace rcm
