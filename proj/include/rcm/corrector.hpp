// The corrector chi: the periodic cell-problem minimizer of the weighted
// Dirichlet energy sum_b omega_b |e_b + chi(v) - chi(u)|^2, so that
// phi(x) = x + chi(x) is harmonic for the lazy walk. Solved per coordinate
// by conjugate gradient on the weighted graph Laplacian with a diagonal
// preconditioner, restricted to the largest positive cluster.
//
// The stopping rule bounds the true harmonicity residual in the max norm:
// the per-site residual vector (1/2d) sum_q omega_q (e_q + chi(nbr) - chi(x))
// satisfies max_x |r(x)|_2 <= tolerance on exit. That makes the tolerance a
// literal bound on max |L phi|, not a relative figure.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcm/cluster.hpp"
#include "rcm/field.hpp"
#include "rcm/induced_kernel.hpp"

namespace rcm {

struct CorrectorOptions {
    double tolerance = 1e-8; // max-norm bound on the harmonicity residual
    std::int64_t max_iterations = 50000; // per coordinate
    const std::vector<double>* initial_guess = nullptr; // site-major, dim per site
};

struct CorrectorField {
    int dim = 0;
    double tolerance = 0.0; // requested
    double achieved = 0.0;  // measured max-norm residual after the solve
    std::int64_t iterations = 0; // summed over the d coordinate solves
    std::int32_t anchor = -1;    // lowest domain site, chi there is exactly 0
    bool multiple_components = false;
    std::vector<std::uint8_t> in_domain; // 1 on the largest positive cluster
    std::vector<double> chi; // site-major d-vectors, zero outside the domain

    const double* at(std::int32_t s) const {
        return chi.data() + static_cast<std::size_t>(s) * dim;
    }
    double norm_at(std::int32_t s) const {
        const double* v = at(s);
        double n2 = 0.0;
        for (int k = 0; k < dim; ++k) n2 += v[k] * v[k];
        return std::sqrt(n2);
    }
};

struct ResidualStats {
    double max = 0.0;
    double mean = 0.0;
};

// Harmonicity residual of phi(x) = x + chi(x) over the corrector's domain,
// per-site l2 norms of (1/2d) sum_q omega_q (e_q + chi(nbr) - chi(x)).
inline ResidualStats harmonic_residual(const ConductanceField& f, const CorrectorField& c) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    const double inv2d = 1.0 / (2.0 * d);
    ResidualStats out;
    std::int64_t counted = 0;
    for (std::int32_t s = 0; s < lat.n_sites(); ++s) {
        if (!c.in_domain[static_cast<std::size_t>(s)]) continue;
        double n2 = 0.0;
        for (int k = 0; k < d; ++k) {
            double r = 0.0;
            for (int q = 0; q < f.slots(); ++q) {
                double w = f.weight_at(s, q);
                if (w <= 0.0) continue;
                std::int32_t v = f.neighbor_at(s, q);
                double e = ConductanceField::slot_axis(q) == k
                               ? static_cast<double>(ConductanceField::slot_dir(q))
                               : 0.0;
                r += w * (e + c.at(v)[k] - c.at(s)[k]);
            }
            r *= inv2d;
            n2 += r * r;
        }
        double n = std::sqrt(n2);
        out.max = std::max(out.max, n);
        out.mean += n;
        ++counted;
    }
    if (counted > 0) out.mean /= static_cast<double>(counted);
    return out;
}

// Residual of phi under the induced kernel on the strong cluster:
// sum_y w_xy (phi(y) - phi(x)) with the minimal-image displacement standing
// in for the unwrapped excursion displacement. Exact unless a hole excursion
// can wind around the torus, which needs a hole of box-scale diameter.
inline ResidualStats harmonic_residual_alpha(const ConductanceField& f, const CorrectorField& c,
                                             const InducedKernel& K) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    ResidualStats out;
    std::int64_t counted = 0;
    int delta[BoxLattice::max_dim];
    for (std::size_t xi = 0; xi < K.rows.size(); ++xi) {
        std::int32_t x = K.sites[xi];
        if (!c.in_domain[static_cast<std::size_t>(x)]) continue;
        double acc[BoxLattice::max_dim] = {0.0};
        for (const auto& [yi, w] : K.rows[xi]) {
            std::int32_t y = K.sites[static_cast<std::size_t>(yi)];
            lat.displacement(x, y, delta);
            for (int k = 0; k < d; ++k)
                acc[k] += w * (static_cast<double>(delta[k]) + c.at(y)[k] - c.at(x)[k]);
        }
        double n2 = 0.0;
        for (int k = 0; k < d; ++k) n2 += acc[k] * acc[k];
        double n = std::sqrt(n2);
        out.max = std::max(out.max, n);
        out.mean += n;
        ++counted;
    }
    if (counted > 0) out.mean /= static_cast<double>(counted);
    return out;
}

// Weighted Dirichlet energy sum_b omega_b |e_b + chi(v) - chi(u)|^2 over the
// edges of the corrector's domain.
inline double dirichlet_energy(const ConductanceField& f, const CorrectorField& c) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    double energy = 0.0;
    for (std::int64_t e = 0; e < lat.n_edges(); ++e) {
        Edge b = lat.edge(e);
        double w = f.omega()[static_cast<std::size_t>(e)];
        if (w <= 0.0) continue;
        if (!c.in_domain[static_cast<std::size_t>(b.u)]) continue;
        for (int k = 0; k < d; ++k) {
            double inc = (k == b.axis ? 1.0 : 0.0) + c.at(b.v)[k] - c.at(b.u)[k];
            energy += w * inc * inc;
        }
    }
    return energy;
}

// Largest loop sum of chi increments around an elementary plaquette whose
// four corners lie in the domain. A true gradient field cancels exactly;
// anything beyond rounding noise means chi is not a function of sites.
inline double max_plaquette_defect(const ConductanceField& f, const CorrectorField& c) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    if (d < 2) return 0.0;
    double worst = 0.0;
    for (std::int32_t s = 0; s < lat.n_sites(); ++s) {
        if (!c.in_domain[static_cast<std::size_t>(s)]) continue;
        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b) {
                std::int32_t sa = lat.neighbor(s, a, +1);
                std::int32_t sb = lat.neighbor(s, b, +1);
                if (sa < 0 || sb < 0) continue;
                std::int32_t sab = lat.neighbor(sa, b, +1);
                if (sab < 0) continue;
                if (!c.in_domain[static_cast<std::size_t>(sa)] ||
                    !c.in_domain[static_cast<std::size_t>(sb)] ||
                    !c.in_domain[static_cast<std::size_t>(sab)])
                    continue;
                for (int k = 0; k < d; ++k) {
                    double loop = (c.at(sa)[k] - c.at(s)[k]) + (c.at(sab)[k] - c.at(sa)[k]) -
                                  (c.at(sab)[k] - c.at(sb)[k]) - (c.at(sb)[k] - c.at(s)[k]);
                    worst = std::max(worst, std::abs(loop));
                }
            }
    }
    return worst;
}

namespace detail {

// Weighted-Laplacian apply restricted to the domain rows: y = L x with
// (L x)(s) = sum_q w(s,q) (x(s) - x(nbr)). Positive edges never leave the
// cluster, so neighbors of domain sites are domain sites.
inline void laplacian_apply(const ConductanceField& f, const std::vector<std::int32_t>& rows,
                            const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::int32_t s = rows[i];
        double acc = 0.0;
        double xs = x[static_cast<std::size_t>(s)];
        for (int q = 0; q < f.slots(); ++q) {
            double w = f.weight_at(s, q);
            if (w <= 0.0) continue;
            acc += w * (xs - x[static_cast<std::size_t>(f.neighbor_at(s, q))]);
        }
        y[static_cast<std::size_t>(s)] = acc;
    }
}

} // namespace detail

// Periodic corrector solve. Throws on free boundaries, on a field with no
// positive edge, and on non-convergence within the iteration budget.
inline CorrectorField solve_corrector_periodic(const ConductanceField& f,
                                               const CorrectorOptions& opts = {}) {
    const BoxLattice& lat = f.lattice();
    if (lat.boundary() != Boundary::periodic)
        throw std::invalid_argument("solve_corrector_periodic: periodic boxes only");
    if (!(opts.tolerance > 0.0))
        throw std::invalid_argument("solve_corrector_periodic: tolerance must be positive");
    const int d = lat.dim();
    const std::int32_t n = lat.n_sites();

    auto positive = label_clusters(f, 0.0);
    if (positive.largest < 0)
        throw std::invalid_argument("solve_corrector_periodic: field has no positive edge");

    CorrectorField out;
    out.dim = d;
    out.tolerance = opts.tolerance;
    out.multiple_components = positive.component_size.size() > 1;
    out.in_domain.assign(static_cast<std::size_t>(n), 0);
    out.chi.assign(static_cast<std::size_t>(n) * d, 0.0);

    std::vector<std::int32_t> rows;
    for (std::int32_t s = 0; s < n; ++s)
        if (positive.in_largest(s)) {
            out.in_domain[static_cast<std::size_t>(s)] = 1;
            if (out.anchor < 0) out.anchor = s;
            rows.push_back(s);
        }

    // Diagonal of the Laplacian, for the Jacobi preconditioner.
    std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
    for (std::int32_t s : rows) diag[static_cast<std::size_t>(s)] = f.incident_weight(s);

    // The invariant bounds the per-site l2 residual of the harmonicity
    // equation, which carries a 1/2d factor; a componentwise bound of
    // tol/sqrt(d) on (b - L chi_k)/2d delivers it.
    const double stop = opts.tolerance * 2.0 * d / std::sqrt(static_cast<double>(d));

    std::vector<double> b(static_cast<std::size_t>(n)), x(static_cast<std::size_t>(n)),
        r(static_cast<std::size_t>(n)), z(static_cast<std::size_t>(n)),
        p(static_cast<std::size_t>(n)), q(static_cast<std::size_t>(n));

    if (opts.initial_guess && opts.initial_guess->size() != static_cast<std::size_t>(n) * d)
        throw std::invalid_argument("solve_corrector_periodic: bad guess size");

    for (int k = 0; k < d; ++k) {
        std::fill(b.begin(), b.end(), 0.0);
        std::fill(x.begin(), x.end(), 0.0);
        for (std::int32_t s : rows) {
            // Signed weight sum along axis k: the +k slot minus the -k slot.
            b[static_cast<std::size_t>(s)] =
                f.weight_at(s, 2 * k) - f.weight_at(s, 2 * k + 1);
            if (opts.initial_guess)
                x[static_cast<std::size_t>(s)] =
                    (*opts.initial_guess)[static_cast<std::size_t>(s) * d + k];
        }

        detail::laplacian_apply(f, rows, x, q);
        for (std::int32_t s : rows)
            r[static_cast<std::size_t>(s)] =
                b[static_cast<std::size_t>(s)] - q[static_cast<std::size_t>(s)];
        double rho = 0.0, rmax = 0.0;
        for (std::int32_t s : rows) {
            z[static_cast<std::size_t>(s)] =
                r[static_cast<std::size_t>(s)] / diag[static_cast<std::size_t>(s)];
            rho += r[static_cast<std::size_t>(s)] * z[static_cast<std::size_t>(s)];
            rmax = std::max(rmax, std::abs(r[static_cast<std::size_t>(s)]));
        }
        p = z;

        std::int64_t it = 0;
        while (rmax > stop) {
            if (++it > opts.max_iterations)
                throw std::runtime_error(
                    "solve_corrector_periodic: no convergence after " +
                    std::to_string(opts.max_iterations) + " iterations (residual " +
                    std::to_string(rmax) + ", target " + std::to_string(stop) + ")");
            detail::laplacian_apply(f, rows, p, q);
            double pq = 0.0;
            for (std::int32_t s : rows)
                pq += p[static_cast<std::size_t>(s)] * q[static_cast<std::size_t>(s)];
            double alpha = rho / pq;
            for (std::int32_t s : rows) {
                x[static_cast<std::size_t>(s)] += alpha * p[static_cast<std::size_t>(s)];
                r[static_cast<std::size_t>(s)] -= alpha * q[static_cast<std::size_t>(s)];
            }
            // The recurrence residual drifts from the true one; refresh it
            // periodically and whenever the loop is about to exit.
            rmax = 0.0;
            for (std::int32_t s : rows)
                rmax = std::max(rmax, std::abs(r[static_cast<std::size_t>(s)]));
            if (rmax <= stop || it % 64 == 0) {
                detail::laplacian_apply(f, rows, x, q);
                rmax = 0.0;
                for (std::int32_t s : rows) {
                    r[static_cast<std::size_t>(s)] =
                        b[static_cast<std::size_t>(s)] - q[static_cast<std::size_t>(s)];
                    rmax = std::max(rmax, std::abs(r[static_cast<std::size_t>(s)]));
                }
                if (rmax <= stop) break;
            }
            double rho_next = 0.0;
            for (std::int32_t s : rows) {
                z[static_cast<std::size_t>(s)] =
                    r[static_cast<std::size_t>(s)] / diag[static_cast<std::size_t>(s)];
                rho_next += r[static_cast<std::size_t>(s)] * z[static_cast<std::size_t>(s)];
            }
            double beta = rho_next / rho;
            rho = rho_next;
            for (std::int32_t s : rows)
                p[static_cast<std::size_t>(s)] =
                    z[static_cast<std::size_t>(s)] + beta * p[static_cast<std::size_t>(s)];
        }
        out.iterations += it;
        for (std::int32_t s : rows)
            out.chi[static_cast<std::size_t>(s) * d + k] = x[static_cast<std::size_t>(s)];
    }

    // Normalize: chi vanishes at the anchor, exactly.
    for (int k = 0; k < d; ++k) {
        double base = out.chi[static_cast<std::size_t>(out.anchor) * d + k];
        for (std::int32_t s : rows) out.chi[static_cast<std::size_t>(s) * d + k] -= base;
        out.chi[static_cast<std::size_t>(out.anchor) * d + k] = 0.0;
    }

    out.achieved = harmonic_residual(f, out).max;
    return out;
}

// Closed-form 1-d corrector: chi(x) = (1/C) sum_{n<x} (1/omega_{n,n+1} - C)
// with C the mean of 1/omega over the ring, which telescopes to zero around
// the loop and is harmonic by direct cancellation.
inline CorrectorField corrector_1d_exact(const ConductanceField& f) {
    const BoxLattice& lat = f.lattice();
    if (lat.dim() != 1) throw std::invalid_argument("corrector_1d_exact: 1-d only");
    if (lat.boundary() != Boundary::periodic)
        throw std::invalid_argument("corrector_1d_exact: periodic boxes only");
    const int L = lat.side();
    double c_sum = 0.0;
    for (std::int64_t e = 0; e < lat.n_edges(); ++e) {
        double w = f.omega()[static_cast<std::size_t>(e)];
        if (w <= 0.0)
            throw std::invalid_argument("corrector_1d_exact: zero conductance at edge " +
                                        std::to_string(e));
        c_sum += 1.0 / w;
    }
    const double C = c_sum / static_cast<double>(L);

    CorrectorField out;
    out.dim = 1;
    out.anchor = 0;
    out.in_domain.assign(static_cast<std::size_t>(L), 1);
    out.chi.assign(static_cast<std::size_t>(L), 0.0);
    double acc = 0.0;
    for (int x = 1; x < L; ++x) {
        // Edge (x-1, x) is the +axis edge of site x-1: slot 0.
        double w = f.weight_at(static_cast<std::int32_t>(x - 1), 0);
        acc += (1.0 / w - C) / C;
        out.chi[static_cast<std::size_t>(x)] = acc;
    }
    out.achieved = harmonic_residual(f, out).max;
    return out;
}

// Worst defect of the shift identity chi(omega, x) - chi(omega, y) =
// chi(tau_y omega, x - y) over the given pairs, re-solving on each shifted
// field at the same tolerance. The shifted solve is compared through its
// increment from the shifted origin, which frees the check from the anchor
// choice.
inline double cocycle_defect(const ConductanceField& f, const CorrectorField& c,
                             const std::vector<std::pair<std::int32_t, std::int32_t>>& pairs,
                             const CorrectorOptions& opts = {}) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    double worst = 0.0;
    int yc[BoxLattice::max_dim], xc[BoxLattice::max_dim], rel[BoxLattice::max_dim];
    for (auto [x, y] : pairs) {
        if (!c.in_domain[static_cast<std::size_t>(x)] ||
            !c.in_domain[static_cast<std::size_t>(y)])
            throw std::invalid_argument("cocycle_defect: pair outside the corrector domain");
        lat.site_coords(y, yc);
        auto shifted = shift_field(f, yc);
        auto cs = solve_corrector_periodic(shifted, opts);
        lat.site_coords(x, xc);
        for (int k = 0; k < d; ++k) {
            rel[k] = xc[k] - yc[k];
            rel[k] %= lat.side();
            if (rel[k] < 0) rel[k] += lat.side();
        }
        std::int32_t xy = lat.coords_site(rel);
        std::int32_t origin = 0;
        if (!cs.in_domain[static_cast<std::size_t>(xy)] ||
            !cs.in_domain[static_cast<std::size_t>(origin)])
            throw std::invalid_argument("cocycle_defect: shifted pair left the domain");
        for (int k = 0; k < d; ++k) {
            double lhs = c.at(x)[k] - c.at(y)[k];
            double rhs = cs.at(xy)[k] - cs.at(origin)[k];
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    }
    return worst;
}

struct SublinearityStats {
    std::vector<int> n;          // radii 0..L/2
    std::vector<double> R;       // max |chi| over strong sites within radius
    std::vector<double> R_over_n; // R_n / n, 0 at n = 0
    std::vector<std::int32_t> argmax_site; // lowest maximizer site per radius
    std::vector<double> eps;
    std::vector<std::vector<double>> density; // density[i][j]: radius n[i], eps[j]
    double edge_energy_mean = 0.0; // mean of omega |chi(v)-chi(u)|^2 on strong edges
    double contraction_eps = 0.0;
    double contraction_delta = 0.0;
    std::vector<int> contraction_n;
    std::vector<double> contraction_defect; // R_n - (eps n + delta R_3n)
};

struct SublinearityOptions {
    std::vector<double> eps = {0.05, 0.1, 0.2};
    double contraction_eps = 0.1;
    double contraction_delta = 0.5;
};

// Growth diagnostics of chi over the strong cluster: the R_n curve with its
// maximizers, exceedance densities, the empirical edge energy, and the
// contraction defect table.
inline SublinearityStats sublinearity_stats(const ConductanceField& f, const CorrectorField& c,
                                            const ClusterLabeling& strong,
                                            const SublinearityOptions& opts = {}) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    const int nmax = lat.side() / 2;

    SublinearityStats out;
    out.eps = opts.eps;
    out.contraction_eps = opts.contraction_eps;
    out.contraction_delta = opts.contraction_delta;
    out.n.resize(static_cast<std::size_t>(nmax) + 1);
    out.R.assign(static_cast<std::size_t>(nmax) + 1, 0.0);
    out.R_over_n.assign(static_cast<std::size_t>(nmax) + 1, 0.0);
    out.argmax_site.assign(static_cast<std::size_t>(nmax) + 1, -1);

    // Pass over strong sites once, bucketed by centered l-inf radius.
    std::vector<double> best(static_cast<std::size_t>(nmax) + 1, -1.0);
    std::vector<std::int32_t> best_site(static_cast<std::size_t>(nmax) + 1, -1);
    std::vector<double> norms;
    std::vector<int> rads;
    for (std::int32_t s = 0; s < lat.n_sites(); ++s) {
        if (!strong.in_largest(s)) continue;
        int rad = lat.linf_from_origin(s);
        if (rad > nmax) rad = nmax; // only possible on odd sides
        double v = c.norm_at(s);
        norms.push_back(v);
        rads.push_back(rad);
        if (v > best[static_cast<std::size_t>(rad)]) {
            best[static_cast<std::size_t>(rad)] = v;
            best_site[static_cast<std::size_t>(rad)] = s; // first hit is the lowest site
        }
    }
    double run = 0.0;
    std::int32_t run_site = -1;
    for (int nn = 0; nn <= nmax; ++nn) {
        out.n[static_cast<std::size_t>(nn)] = nn;
        double v = best[static_cast<std::size_t>(nn)];
        std::int32_t vs = best_site[static_cast<std::size_t>(nn)];
        if (vs >= 0) {
            if (run_site < 0 || v > run) {
                run = v;
                run_site = vs;
            } else if (v == run && vs < run_site) {
                run_site = vs;
            }
        }
        out.R[static_cast<std::size_t>(nn)] = run_site < 0 ? 0.0 : run;
        out.argmax_site[static_cast<std::size_t>(nn)] = run_site;
        if (nn > 0) out.R_over_n[static_cast<std::size_t>(nn)] = out.R[static_cast<std::size_t>(nn)] / nn;
    }

    // Exceedance densities: for each radius n >= 1 and threshold eps,
    // n^{-d} #{ strong x, |x| <= n, |chi(x)| >= eps n }.
    out.density.assign(static_cast<std::size_t>(nmax) + 1,
                       std::vector<double>(opts.eps.size(), 0.0));
    for (int nn = 1; nn <= nmax; ++nn) {
        for (std::size_t j = 0; j < opts.eps.size(); ++j) {
            std::int64_t count = 0;
            double bar = opts.eps[j] * nn;
            for (std::size_t i = 0; i < norms.size(); ++i)
                if (rads[i] <= nn && norms[i] >= bar) ++count;
            out.density[static_cast<std::size_t>(nn)][j] =
                static_cast<double>(count) / std::pow(static_cast<double>(nn), d);
        }
    }

    // Mean edge energy on the strong cluster.
    std::int64_t edges = 0;
    double energy = 0.0;
    for (std::int64_t e = 0; e < lat.n_edges(); ++e) {
        Edge b = lat.edge(e);
        double w = f.omega()[static_cast<std::size_t>(e)];
        if (!edge_qualifies(w, strong.threshold)) continue;
        if (!strong.in_largest(b.u) || !strong.in_largest(b.v)) continue;
        double inc2 = 0.0;
        for (int k = 0; k < d; ++k) {
            double inc = c.at(b.v)[k] - c.at(b.u)[k];
            inc2 += inc * inc;
        }
        energy += w * inc2;
        ++edges;
    }
    if (edges > 0) out.edge_energy_mean = energy / static_cast<double>(edges);

    for (int nn = 1; 3 * nn <= nmax; ++nn) {
        out.contraction_n.push_back(nn);
        out.contraction_defect.push_back(out.R[static_cast<std::size_t>(nn)] -
                                         (opts.contraction_eps * nn +
                                          opts.contraction_delta *
                                              out.R[static_cast<std::size_t>(3 * nn)]));
    }
    return out;
}

struct HoleMaxPrinciple {
    double worst_defect = 0.0; // max over holes of inside - (boundary + slack)
    int worst_hole = -1;
    std::vector<double> inside_max;
    std::vector<double> boundary_max;
    std::vector<double> slack; // per hole: max over (h, s) of |s - h|_2
};

// Optional-stopping bound for chi on the holes: starting inside a hole, phi
// is the expected phi at absorption, so |chi| inside is at most the boundary
// maximum plus the worst exit displacement. Returns per-hole figures and the
// worst signed defect (nonpositive when the bound holds).
inline HoleMaxPrinciple hole_max_principle(const ConductanceField& f, const CorrectorField& c,
                                           const std::vector<HoleComponent>& holes) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    HoleMaxPrinciple out;
    int delta[BoxLattice::max_dim];
    for (std::size_t h = 0; h < holes.size(); ++h) {
        const HoleComponent& hole = holes[h];
        double inside = 0.0, boundary = 0.0, slack = 0.0;
        for (std::int32_t s : hole.sites) inside = std::max(inside, c.norm_at(s));
        for (std::int32_t s : hole.boundary) boundary = std::max(boundary, c.norm_at(s));
        for (std::int32_t hs : hole.sites)
            for (std::int32_t bs : hole.boundary) {
                lat.displacement(hs, bs, delta);
                double n2 = 0.0;
                for (int k = 0; k < d; ++k)
                    n2 += static_cast<double>(delta[k]) * static_cast<double>(delta[k]);
                slack = std::max(slack, std::sqrt(n2));
            }
        out.inside_max.push_back(inside);
        out.boundary_max.push_back(boundary);
        out.slack.push_back(slack);
        double defect = inside - (boundary + slack);
        if (out.worst_hole < 0 || defect > out.worst_defect) {
            out.worst_defect = defect;
            out.worst_hole = static_cast<int>(h);
        }
    }
    if (out.worst_hole < 0) out.worst_defect = 0.0; // hole-free: vacuous
    return out;
}

} // namespace rcm
