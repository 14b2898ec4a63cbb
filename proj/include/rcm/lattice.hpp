// Finite box in Z^d with periodic or free boundary.
//
// Sites are indexed 0..L^d-1 in mixed radix, axis 0 fastest, so the origin
// is site 0 and the lowest index in a set is a deterministic representative.
// Edges are (site, axis) pairs pointing in the +axis direction:
//   periodic: every (u, k) is an edge, index e = u*d + k. At L = 2 this
//             yields two parallel edges per site pair, which is exactly what
//             keeps every site at 2d incident edges on the small torus.
//   free:     only pairs with coord_k(u) < L-1, packed per axis.
//
// Centered coordinates live in (-L/2, L/2]; minimal-image displacements use
// the same convention.

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcm {

enum class Boundary { periodic, free_box };

inline const char* boundary_name(Boundary b) {
    return b == Boundary::periodic ? "periodic" : "free";
}

inline Boundary boundary_from_name(const std::string& s) {
    if (s == "periodic") return Boundary::periodic;
    if (s == "free") return Boundary::free_box;
    throw std::invalid_argument("boundary must be 'periodic' or 'free', got '" + s + "'");
}

struct Edge {
    std::int32_t u;
    std::int32_t v;
    int axis;
};

class BoxLattice {
public:
    static constexpr int max_dim = 8;

    BoxLattice(int dim, int side, Boundary boundary)
        : dim_(dim), side_(side), boundary_(boundary) {
        if (dim < 1 || dim > max_dim)
            throw std::invalid_argument("lattice dim out of range [1," +
                                        std::to_string(max_dim) + "]: " + std::to_string(dim));
        if (side < 2)
            throw std::invalid_argument("lattice side must be >= 2, got " + std::to_string(side));
        double count = 1.0;
        for (int k = 0; k < dim; ++k) count *= side;
        if (count > 2147483646.0)
            throw std::invalid_argument("lattice too large: side^dim exceeds 2^31-1 sites");
        n_sites_ = 1;
        for (int k = 0; k < dim; ++k) {
            stride_[k] = n_sites_;
            n_sites_ *= side;
        }
        per_axis_free_ = static_cast<std::int64_t>(side - 1) * (n_sites_ / side);
        n_edges_ = boundary_ == Boundary::periodic
                       ? static_cast<std::int64_t>(dim_) * n_sites_
                       : static_cast<std::int64_t>(dim_) * per_axis_free_;
    }

    int dim() const { return dim_; }
    int side() const { return side_; }
    Boundary boundary() const { return boundary_; }
    std::int64_t n_sites() const { return n_sites_; }
    std::int64_t n_edges() const { return n_edges_; }

    int coord(std::int32_t s, int axis) const {
        return static_cast<int>((s / stride_[axis]) % side_);
    }

    void site_coords(std::int32_t s, int* c) const {
        for (int k = 0; k < dim_; ++k) c[k] = coord(s, k);
    }

    std::int32_t coords_site(const int* c) const {
        std::int64_t s = 0;
        for (int k = 0; k < dim_; ++k) s += static_cast<std::int64_t>(c[k]) * stride_[k];
        return static_cast<std::int32_t>(s);
    }

    // Neighbor in direction dir (+1 or -1) along axis; -1 when the free
    // boundary cuts it off.
    std::int32_t neighbor(std::int32_t s, int axis, int dir) const {
        int c = coord(s, axis);
        if (boundary_ == Boundary::periodic) {
            int cn = c + dir;
            if (cn < 0) cn += side_;
            if (cn >= side_) cn -= side_;
            return static_cast<std::int32_t>(s + static_cast<std::int64_t>(cn - c) * stride_[axis]);
        }
        int cn = c + dir;
        if (cn < 0 || cn >= side_) return -1;
        return static_cast<std::int32_t>(s + static_cast<std::int64_t>(dir) * stride_[axis]);
    }

    Edge edge(std::int64_t e) const {
        if (boundary_ == Boundary::periodic) {
            auto u = static_cast<std::int32_t>(e / dim_);
            int axis = static_cast<int>(e % dim_);
            return {u, neighbor(u, axis, +1), axis};
        }
        int axis = static_cast<int>(e / per_axis_free_);
        std::int64_t j = e % per_axis_free_;
        int c[max_dim];
        for (int m = 0; m < dim_; ++m) {
            int size = (m == axis) ? side_ - 1 : side_;
            c[m] = static_cast<int>(j % size);
            j /= size;
        }
        std::int32_t u = coords_site(c);
        return {u, neighbor(u, axis, +1), axis};
    }

    // Index of the edge leaving u in +axis; -1 if absent (free boundary).
    std::int64_t edge_index(std::int32_t u, int axis) const {
        if (boundary_ == Boundary::periodic)
            return static_cast<std::int64_t>(u) * dim_ + axis;
        if (coord(u, axis) >= side_ - 1) return -1;
        std::int64_t j = 0, mult = 1;
        for (int m = 0; m < dim_; ++m) {
            int size = (m == axis) ? side_ - 1 : side_;
            j += static_cast<std::int64_t>(coord(u, m)) * mult;
            mult *= size;
        }
        return static_cast<std::int64_t>(axis) * per_axis_free_ + j;
    }

    // Centered representative of a coordinate, in (-L/2, L/2].
    int centered(int c) const { return c <= side_ / 2 ? c : c - side_; }

    // Minimal-image representative of a coordinate difference.
    int min_image(int delta) const {
        if (boundary_ == Boundary::free_box) return delta;
        int m = delta % side_;
        if (m < 0) m += side_;
        return centered(m);
    }

    // Minimal-image displacement vector from a to b.
    void displacement(std::int32_t a, std::int32_t b, int* out) const {
        for (int k = 0; k < dim_; ++k) out[k] = min_image(coord(b, k) - coord(a, k));
    }

    // max_k |centered coordinate|, distance from the origin in the centered box.
    int linf_from_origin(std::int32_t s) const {
        int m = 0;
        for (int k = 0; k < dim_; ++k) {
            int a = centered(coord(s, k));
            if (a < 0) a = -a;
            if (a > m) m = a;
        }
        return m;
    }

    bool same(const BoxLattice& o) const {
        return dim_ == o.dim_ && side_ == o.side_ && boundary_ == o.boundary_;
    }

private:
    int dim_;
    int side_;
    Boundary boundary_;
    std::int64_t n_sites_ = 0;
    std::int64_t n_edges_ = 0;
    std::int64_t per_axis_free_ = 0;
    std::int64_t stride_[max_dim] = {};
};

} // namespace rcm
