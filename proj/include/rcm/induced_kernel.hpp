// One-visit transition kernel of the walk observed on the strong cluster.
//
// From a strong-cluster site x, the lazy walk makes its next step; if it
// lands in a weak hole, it wanders there until it re-enters the strong
// cluster. The kernel entry w(x,y) is the probability that the first
// strong-cluster visit (lazy steps included, so x itself is a possible
// target after one holding step) happens at y. Hole excursions are resolved
// exactly by linear absorption solves, one per hole: with A the within-hole
// single-step matrix and B the hole-to-boundary step matrix, the absorption
// distribution is U = (I-A)^{-1} B. No Monte Carlo is involved.
//
// Entries below a configurable floor are dropped and each row renormalized;
// the discarded mass is reported on the kernel. Rows sum to one and the
// matrix is symmetric (the counting measure is reversible for it) up to
// solver roundoff.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rcm/cluster.hpp"
#include "rcm/field.hpp"

namespace rcm {

struct InducedKernel {
    int dim = 0;
    int side = 0;
    Boundary boundary = Boundary::periodic;
    double alpha = 0.0;
    double floor = 0.0;
    double floored_mass = 0.0; // total probability removed by the floor, pre-renormalization

    std::vector<std::int32_t> sites;              // kernel index -> site id, ascending
    std::vector<std::int32_t> site_index;         // site id -> kernel index, -1 outside
    std::vector<std::vector<std::pair<std::int32_t, double>>> rows; // targets by kernel index

    std::int64_t n() const { return static_cast<std::int64_t>(sites.size()); }

    double entry(std::int32_t xi, std::int32_t yi) const {
        const auto& row = rows[static_cast<std::size_t>(xi)];
        auto it = std::lower_bound(row.begin(), row.end(), yi,
                                   [](const auto& p, std::int32_t v) { return p.first < v; });
        return (it != row.end() && it->first == yi) ? it->second : 0.0;
    }
};

struct InducedKernelOptions {
    double floor = 1e-15;     // entries below this are dropped, rows renormalized
    int dense_cap = 1000;     // holes up to this size use the dense LU
    double sweep_tol = 1e-14; // residual target of the sweep fallback
    int max_sweeps = 200000;
};

namespace detail {

// Dense LU with partial pivoting, in place; solves one system per column of
// rhs. Sized for hole blocks, which stay far below the dense cap in every
// experiment here.
inline void lu_solve_in_place(std::vector<double>& a, int m, std::vector<double>& rhs, int nrhs) {
    std::vector<int> piv(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) piv[static_cast<std::size_t>(i)] = i;
    for (int col = 0; col < m; ++col) {
        int best = col;
        double mag = std::abs(a[static_cast<std::size_t>(col) * m + col]);
        for (int r = col + 1; r < m; ++r) {
            double v = std::abs(a[static_cast<std::size_t>(r) * m + col]);
            if (v > mag) {
                mag = v;
                best = r;
            }
        }
        if (mag == 0.0) throw std::runtime_error("hole absorption solve: singular block");
        if (best != col) {
            for (int c = 0; c < m; ++c)
                std::swap(a[static_cast<std::size_t>(col) * m + c],
                          a[static_cast<std::size_t>(best) * m + c]);
            for (int c = 0; c < nrhs; ++c)
                std::swap(rhs[static_cast<std::size_t>(col) * nrhs + c],
                          rhs[static_cast<std::size_t>(best) * nrhs + c]);
        }
        const double pivot = a[static_cast<std::size_t>(col) * m + col];
        for (int r = col + 1; r < m; ++r) {
            double f = a[static_cast<std::size_t>(r) * m + col] / pivot;
            if (f == 0.0) continue;
            a[static_cast<std::size_t>(r) * m + col] = f;
            for (int c = col + 1; c < m; ++c)
                a[static_cast<std::size_t>(r) * m + c] -=
                    f * a[static_cast<std::size_t>(col) * m + c];
            for (int c = 0; c < nrhs; ++c)
                rhs[static_cast<std::size_t>(r) * nrhs + c] -=
                    f * rhs[static_cast<std::size_t>(col) * nrhs + c];
        }
    }
    for (int col = m - 1; col >= 0; --col) {
        const double pivot = a[static_cast<std::size_t>(col) * m + col];
        for (int c = 0; c < nrhs; ++c) {
            double v = rhs[static_cast<std::size_t>(col) * nrhs + c];
            for (int r = col + 1; r < m; ++r)
                v -= a[static_cast<std::size_t>(col) * m + r] *
                     rhs[static_cast<std::size_t>(r) * nrhs + c];
            rhs[static_cast<std::size_t>(col) * nrhs + c] = v / pivot;
        }
    }
}

// Gauss-Seidel sweeps for oversized holes. The iteration matrix is strictly
// substochastic (every hole site leaks to the boundary through the cluster),
// so sweeps contract.
inline void sweep_solve(const std::vector<double>& ia, int m, const std::vector<double>& b,
                        int nrhs, std::vector<double>& u, double tol, int max_sweeps) {
    u.assign(static_cast<std::size_t>(m) * nrhs, 0.0);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double worst = 0.0;
        for (int i = 0; i < m; ++i) {
            const double dii = ia[static_cast<std::size_t>(i) * m + i];
            for (int c = 0; c < nrhs; ++c) {
                double v = b[static_cast<std::size_t>(i) * nrhs + c];
                for (int j = 0; j < m; ++j) {
                    if (j == i) continue;
                    v -= ia[static_cast<std::size_t>(i) * m + j] *
                         u[static_cast<std::size_t>(j) * nrhs + c];
                }
                v /= dii;
                worst = std::max(worst, std::abs(v - u[static_cast<std::size_t>(i) * nrhs + c]));
                u[static_cast<std::size_t>(i) * nrhs + c] = v;
            }
        }
        if (worst <= tol) return;
    }
    throw std::runtime_error("hole absorption solve: sweep iteration did not converge");
}

} // namespace detail

inline InducedKernel build_induced_kernel(const ConductanceField& f,
                                          const ClusterLabeling& positive,
                                          const ClusterLabeling& strong,
                                          const InducedKernelOptions& opts = {}) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    const double inv2d = 1.0 / (2.0 * d);
    if (strong.largest < 0)
        throw std::invalid_argument("induced kernel: strong cluster is empty");
    if (!(opts.floor >= 0.0 && opts.floor < 1e-3))
        throw std::invalid_argument("induced kernel: floor out of range [0, 1e-3)");

    InducedKernel K;
    K.dim = d;
    K.side = lat.side();
    K.boundary = lat.boundary();
    K.alpha = strong.threshold;
    K.floor = opts.floor;
    K.site_index.assign(static_cast<std::size_t>(lat.n_sites()), -1);
    for (std::int32_t s = 0; s < lat.n_sites(); ++s) {
        if (!strong.in_largest(s)) continue;
        if (!positive.in_largest(s))
            throw std::invalid_argument(
                "induced kernel: strong cluster is not inside the positive cluster "
                "(no absorbing boundary exists)");
        K.site_index[s] = static_cast<std::int32_t>(K.sites.size());
        K.sites.push_back(s);
    }

    std::vector<HoleComponent> holes = hole_components(f, positive, strong);
    std::vector<std::int32_t> hole_of = hole_index_by_site(lat, holes);

    if (lat.boundary() == Boundary::free_box) {
        for (const HoleComponent& h : holes)
            for (std::int32_t s : h.sites)
                for (int k = 0; k < d; ++k) {
                    int c = lat.coord(s, k);
                    if (c == 0 || c == lat.side() - 1)
                        throw std::invalid_argument(
                            "induced kernel: hole touches the free boundary, absorption is "
                            "ill-posed (site " + std::to_string(s) + ")");
                }
    }

    // Absorption distributions per hole: U[i][c] = P(first strong site hit is
    // boundary[c] | start at hole site i).
    std::vector<std::vector<double>> hole_u(holes.size());
    for (std::size_t h = 0; h < holes.size(); ++h) {
        const HoleComponent& hole = holes[h];
        const int m = static_cast<int>(hole.sites.size());
        const int nb = static_cast<int>(hole.boundary.size());
        if (nb == 0)
            throw std::runtime_error("induced kernel: hole without strong boundary");
        auto local = [&](std::int32_t s) {
            auto it = std::lower_bound(hole.sites.begin(), hole.sites.end(), s);
            return static_cast<int>(it - hole.sites.begin());
        };
        auto bcol = [&](std::int32_t s) {
            auto it = std::lower_bound(hole.boundary.begin(), hole.boundary.end(), s);
            return static_cast<int>(it - hole.boundary.begin());
        };
        std::vector<double> ia(static_cast<std::size_t>(m) * m, 0.0);
        std::vector<double> b(static_cast<std::size_t>(m) * nb, 0.0);
        for (int i = 0; i < m; ++i) {
            std::int32_t s = hole.sites[static_cast<std::size_t>(i)];
            // (I - A)_ii = 1 - stay(s) = incident/2d; in-hole moves subtract.
            ia[static_cast<std::size_t>(i) * m + i] = f.incident_weight(s) * inv2d;
            for (int q = 0; q < f.slots(); ++q) {
                double w = f.weight_at(s, q);
                if (w <= 0.0) continue;
                std::int32_t v = f.neighbor_at(s, q);
                if (strong.in_largest(v)) {
                    b[static_cast<std::size_t>(i) * nb + bcol(v)] += w * inv2d;
                } else {
                    // Positive edge from hole material: the far end is hole
                    // material of the same component.
                    ia[static_cast<std::size_t>(i) * m + local(v)] -= w * inv2d;
                }
            }
        }
        if (m <= opts.dense_cap) {
            detail::lu_solve_in_place(ia, m, b, nb);
            hole_u[h] = std::move(b);
        } else {
            detail::sweep_solve(ia, m, b, nb, hole_u[h], opts.sweep_tol, opts.max_sweeps);
        }
    }

    // Assemble rows.
    K.rows.resize(K.sites.size());
    std::vector<std::pair<std::int32_t, double>> acc;
    for (std::size_t xi = 0; xi < K.sites.size(); ++xi) {
        std::int32_t x = K.sites[xi];
        acc.clear();
        double stay = 1.0 - f.incident_weight(x) * inv2d;
        if (stay > 0.0) acc.emplace_back(static_cast<std::int32_t>(xi), stay);
        for (int q = 0; q < f.slots(); ++q) {
            double w = f.weight_at(x, q);
            if (w <= 0.0) continue;
            std::int32_t v = f.neighbor_at(x, q);
            double p = w * inv2d;
            if (strong.in_largest(v)) {
                acc.emplace_back(K.site_index[v], p);
            } else {
                std::int32_t h = hole_of[v];
                if (h < 0)
                    throw std::runtime_error(
                        "induced kernel: positive neighbor of a strong site is neither strong "
                        "nor hole material; pass the positive-cluster labeling of this field");
                const HoleComponent& hole = holes[static_cast<std::size_t>(h)];
                auto it = std::lower_bound(hole.sites.begin(), hole.sites.end(), v);
                int li = static_cast<int>(it - hole.sites.begin());
                const int nb = static_cast<int>(hole.boundary.size());
                const std::vector<double>& u = hole_u[static_cast<std::size_t>(h)];
                for (int c = 0; c < nb; ++c) {
                    double mass = u[static_cast<std::size_t>(li) * nb + c];
                    if (mass <= 0.0) continue; // tiny negatives are solver dust
                    acc.emplace_back(K.site_index[hole.boundary[static_cast<std::size_t>(c)]],
                                     p * mass);
                }
            }
        }
        std::sort(acc.begin(), acc.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        auto& row = K.rows[xi];
        row.clear();
        for (const auto& [t, w] : acc) {
            if (!row.empty() && row.back().first == t) row.back().second += w;
            else row.emplace_back(t, w);
        }
        double kept = 0.0, dropped = 0.0;
        std::size_t out = 0;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (row[i].second < opts.floor) {
                dropped += row[i].second;
            } else {
                kept += row[i].second;
                row[out++] = row[i];
            }
        }
        row.resize(out);
        K.floored_mass += dropped;
        if (kept <= 0.0)
            throw std::runtime_error("induced kernel: row lost all mass to the floor");
        // Renormalize the kept mass so the row sums to one.
        for (auto& [t, w] : row) w /= kept;
    }
    return K;
}

// Largest absolute deviation of a row sum from one.
inline double max_row_sum_defect(const InducedKernel& K) {
    double worst = 0.0;
    for (const auto& row : K.rows) {
        double s = 0.0;
        for (const auto& [t, w] : row) s += w;
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

// Largest |w(x,y) - w(y,x)|.
inline double max_asymmetry(const InducedKernel& K) {
    double worst = 0.0;
    for (std::size_t xi = 0; xi < K.rows.size(); ++xi)
        for (const auto& [yi, w] : K.rows[xi])
            worst = std::max(worst, std::abs(w - K.entry(yi, static_cast<std::int32_t>(xi))));
    return worst;
}

// Hop distances on the jump graph of the kernel (self-entries ignored),
// from one source to every kernel site; -1 marks unreachable.
inline std::vector<std::int32_t> markov_distances_from(const InducedKernel& K,
                                                       std::int32_t source_site) {
    std::int32_t src = K.site_index[source_site];
    if (src < 0)
        throw std::invalid_argument("markov_distances_from: source not in the kernel");
    std::vector<std::int32_t> dist(K.sites.size(), -1);
    std::queue<std::int32_t> q;
    dist[static_cast<std::size_t>(src)] = 0;
    q.push(src);
    while (!q.empty()) {
        std::int32_t i = q.front();
        q.pop();
        for (const auto& [j, w] : K.rows[static_cast<std::size_t>(i)]) {
            if (j == i || dist[static_cast<std::size_t>(j)] >= 0) continue;
            dist[static_cast<std::size_t>(j)] = dist[static_cast<std::size_t>(i)] + 1;
            q.push(j);
        }
    }
    return dist;
}

// Pairwise variant; unreachable is a value, not an error.
inline std::optional<std::int64_t> markov_distance(const InducedKernel& K, std::int32_t x,
                                                   std::int32_t y) {
    if (K.site_index[x] < 0 || K.site_index[y] < 0) return std::nullopt;
    auto dist = markov_distances_from(K, x);
    std::int32_t v = dist[static_cast<std::size_t>(K.site_index[y])];
    if (v < 0) return std::nullopt;
    return static_cast<std::int64_t>(v);
}

} // namespace rcm
