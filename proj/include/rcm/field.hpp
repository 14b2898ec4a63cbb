// Edge conductances on a box, plus the per-site adjacency table the walk
// and the solvers iterate over.
//
// Adjacency slots: site s has 2d slots, slot q = 2*axis + (0 for +, 1 for -).
// neighbor_at(s,q) is -1 past a free boundary and the slot weight is 0 there,
// so one code path covers both boundary modes. Weights always lie in [0,1];
// construction rejects anything else.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rcm/lattice.hpp"
#include "rcm/law.hpp"

namespace rcm {

struct FieldProvenance {
    bool sampled = false;
    ConductanceLaw law{};
    std::uint64_t seed = 0;
};

class ConductanceField {
public:
    using Provenance = FieldProvenance;

    ConductanceField(BoxLattice lattice, std::vector<double> omega,
                     Provenance prov = Provenance{})
        : lat_(lattice), omega_(std::move(omega)), prov_(prov) {
        if (static_cast<std::int64_t>(omega_.size()) != lat_.n_edges())
            throw std::invalid_argument("field: omega size " + std::to_string(omega_.size()) +
                                        " does not match edge count " +
                                        std::to_string(lat_.n_edges()));
        for (double w : omega_)
            if (!(w >= 0.0 && w <= 1.0))
                throw std::invalid_argument("field: conductance outside [0,1]: " +
                                            std::to_string(w));
        build_adjacency();
    }

    const BoxLattice& lattice() const { return lat_; }
    const std::vector<double>& omega() const { return omega_; }
    const Provenance& provenance() const { return prov_; }

    double omega_at(std::int64_t edge) const { return omega_[static_cast<std::size_t>(edge)]; }

    int slots() const { return 2 * lat_.dim(); }

    std::int32_t neighbor_at(std::int32_t s, int slot) const {
        return neigh_[static_cast<std::size_t>(s) * slots() + slot];
    }

    double weight_at(std::int32_t s, int slot) const {
        return wadj_[static_cast<std::size_t>(s) * slots() + slot];
    }

    static int slot_axis(int slot) { return slot >> 1; }
    static int slot_dir(int slot) { return (slot & 1) ? -1 : +1; }

    // Sum of incident weights; 2d minus this, over 2d, is the lazy holding
    // probability of the walk at s.
    double incident_weight(std::int32_t s) const {
        double t = 0.0;
        for (int q = 0; q < slots(); ++q) t += weight_at(s, q);
        return t;
    }

private:
    void build_adjacency() {
        const int d = lat_.dim();
        const std::int64_t n = lat_.n_sites();
        neigh_.assign(static_cast<std::size_t>(n) * 2 * d, -1);
        wadj_.assign(static_cast<std::size_t>(n) * 2 * d, 0.0);
        for (std::int32_t s = 0; s < n; ++s) {
            for (int k = 0; k < d; ++k) {
                std::int64_t e = lat_.edge_index(s, k);
                if (e < 0) continue;
                std::int32_t v = lat_.neighbor(s, k, +1);
                double w = omega_[static_cast<std::size_t>(e)];
                // +axis slot of s and -axis slot of v. At L = 2 periodic the
                // two parallel edges land in the two opposite slots, once each.
                neigh_[static_cast<std::size_t>(s) * 2 * d + 2 * k] = v;
                wadj_[static_cast<std::size_t>(s) * 2 * d + 2 * k] = w;
                neigh_[static_cast<std::size_t>(v) * 2 * d + 2 * k + 1] = s;
                wadj_[static_cast<std::size_t>(v) * 2 * d + 2 * k + 1] = w;
            }
        }
    }

    BoxLattice lat_;
    std::vector<double> omega_;
    Provenance prov_;
    std::vector<std::int32_t> neigh_;
    std::vector<double> wadj_;
};

inline ConductanceField sample_field(const BoxLattice& lat, const ConductanceLaw& law,
                                     std::uint64_t seed) {
    law.validate();
    std::vector<double> omega(static_cast<std::size_t>(lat.n_edges()));
    for (std::int64_t e = 0; e < lat.n_edges(); ++e)
        omega[static_cast<std::size_t>(e)] = law.sample(seed, e);
    return ConductanceField(lat, std::move(omega), {true, law, seed});
}

// Environment shift: the returned field at edge (u, k) carries the input's
// value at (u + y, k), coordinates mod L. Periodic boxes only; a free box
// has no shift that preserves the edge set.
inline ConductanceField shift_field(const ConductanceField& f, const int* y) {
    const BoxLattice& lat = f.lattice();
    if (lat.boundary() != Boundary::periodic)
        throw std::invalid_argument("shift_field: free-boundary fields cannot be shifted");
    const int d = lat.dim();
    std::vector<double> omega(static_cast<std::size_t>(lat.n_edges()));
    int c[BoxLattice::max_dim];
    for (std::int32_t s = 0; s < lat.n_sites(); ++s) {
        lat.site_coords(s, c);
        for (int k = 0; k < d; ++k) {
            int cs[BoxLattice::max_dim];
            for (int m = 0; m < d; ++m) {
                int cm = (c[m] + y[m]) % lat.side();
                if (cm < 0) cm += lat.side();
                cs[m] = cm;
            }
            std::int32_t src = lat.coords_site(cs);
            omega[static_cast<std::size_t>(lat.edge_index(s, k))] =
                f.omega_at(lat.edge_index(src, k));
        }
    }
    return ConductanceField(lat, std::move(omega));
}

} // namespace rcm
