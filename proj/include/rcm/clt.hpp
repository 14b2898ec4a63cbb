// Invariance-principle statistics for the lazy walk: diffusively rescaled
// paths, the harmonic coordinate phi(x) = x + chi(x) whose walk image is a
// martingale, the diffusion matrix it induces, moment-based isotropy and
// normality checks, and the exact variance split E|X_1|^2 = E|M_1|^2 +
// E|Dchi|^2 that makes the limiting variance strictly smaller than the
// first-step variance whenever the corrector is nontrivial.
//
// All displacement statistics use unwrapped coordinates from walk.hpp, so
// torus winding never folds back into the sample. Exact variants sum over
// the stationary (uniform) measure on the corrector domain; Monte Carlo
// variants draw path p from make_engine(seed, p) and are therefore
// reproducible independently of scheduling.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcm/cluster.hpp"
#include "rcm/corrector.hpp"
#include "rcm/field.hpp"
#include "rcm/rng.hpp"
#include "rcm/stats.hpp"
#include "rcm/walk.hpp"

namespace rcm {

// ---------------------------------------------------------------------------
// Rescaled paths

// B_n(t) = (D_{floor(tn)} + (tn - floor(tn)) (D_{floor(tn)+1} - D_{floor(tn)}))
// / sqrt(n), evaluated at each grid time from the path's unwrapped
// displacement D. Exactly linear between integer multiples of 1/n.
inline std::vector<double> rescale_path(const WalkPath& p, std::int64_t n,
                                        const std::vector<double>& t_grid) {
    if (n < 1) throw std::invalid_argument("rescale_path: n must be at least 1");
    if (t_grid.empty()) throw std::invalid_argument("rescale_path: empty time grid");
    const int d = p.dim;
    const double root = std::sqrt(static_cast<double>(n));
    std::vector<double> out(t_grid.size() * static_cast<std::size_t>(d), 0.0);
    for (std::size_t g = 0; g < t_grid.size(); ++g) {
        const double t = t_grid[g];
        if (!(t >= 0.0)) throw std::invalid_argument("rescale_path: negative time");
        const double tn = t * static_cast<double>(n);
        auto k = static_cast<std::int64_t>(tn);
        const double frac = tn - static_cast<double>(k);
        if (k > p.n_steps() || (frac > 0.0 && k + 1 > p.n_steps()))
            throw std::invalid_argument("rescale_path: path too short for the time grid");
        const std::int32_t* lo = p.displacement(k);
        const std::int32_t* hi = frac > 0.0 ? p.displacement(k + 1) : lo;
        for (int i = 0; i < d; ++i)
            out[g * static_cast<std::size_t>(d) + i] =
                (static_cast<double>(lo[i]) + frac * static_cast<double>(hi[i] - lo[i])) / root;
    }
    return out;
}

// Re-checks a stored path against the field's one-step structure: each move
// must cross a positive edge to a neighbor and the displacement must track it.
inline bool validate_path(const ConductanceField& f, const WalkPath& p) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    if (p.dim != d || p.sites.empty() || p.sites[0] != p.start) return false;
    for (int i = 0; i < d; ++i)
        if (p.disp[static_cast<std::size_t>(i)] != 0) return false;
    for (std::int64_t k = 1; k <= p.n_steps(); ++k) {
        const std::int32_t a = p.sites[static_cast<std::size_t>(k - 1)];
        const std::int32_t b = p.sites[static_cast<std::size_t>(k)];
        const std::int32_t* da = p.displacement(k - 1);
        const std::int32_t* db = p.displacement(k);
        if (a == b) {
            for (int i = 0; i < d; ++i)
                if (da[i] != db[i]) return false;
            continue;
        }
        bool legal = false;
        for (int q = 0; q < f.slots() && !legal; ++q) {
            if (f.neighbor_at(a, q) != b || !(f.weight_at(a, q) > 0.0)) continue;
            const int axis = ConductanceField::slot_axis(q);
            const int dir = ConductanceField::slot_dir(q);
            bool match = true;
            for (int i = 0; i < d && match; ++i)
                match = db[i] - da[i] == (i == axis ? dir : 0);
            legal = match;
        }
        if (!legal) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// The martingale M_k = phi(X_k)

// Unwrapped phi values along a path: start coordinates plus displacement plus
// the corrector read at the torus site. With chi identically zero this is the
// unwrapped walk itself. Throws if the path touches a site outside the
// corrector domain, which signals an inconsistency between path and solve.
inline std::vector<double> martingale_path(const ConductanceField& f, const WalkPath& p,
                                           const CorrectorField& chi) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    if (chi.dim != d) throw std::invalid_argument("martingale_path: dimension mismatch");
    int c0[BoxLattice::max_dim];
    lat.site_coords(p.start, c0);
    std::vector<double> out(static_cast<std::size_t>(p.n_steps() + 1) * d, 0.0);
    for (std::int64_t k = 0; k <= p.n_steps(); ++k) {
        const std::int32_t s = p.sites[static_cast<std::size_t>(k)];
        if (!chi.in_domain[static_cast<std::size_t>(s)])
            throw std::runtime_error("martingale_path: path leaves the corrector domain");
        const std::int32_t* dk = p.displacement(k);
        const double* cs = chi.at(s);
        for (int i = 0; i < d; ++i)
            out[static_cast<std::size_t>(k) * d + i] =
                static_cast<double>(c0[i]) + static_cast<double>(dk[i]) + cs[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Path ensembles

enum class EnsembleMode { fixed_environment, per_environment };
enum class StartRule { origin_site, uniform_cluster };

struct EnsembleOptions {
    std::int64_t n_paths = 0;
    std::int64_t n_steps = 0;
    std::vector<double> t_grid = {1.0}; // fractions of n_steps, in [0,1]
    StartRule start = StartRule::uniform_cluster;
    std::int32_t x0 = 0; // start site under origin_site
    std::uint64_t seed = 0;
    std::uint64_t env_tag = 0; // recorded per path in fixed-environment mode
};

// Checkpointed ensemble: full site sequences are walked but only the rescaled
// values at the time grid plus the first-step increments are kept, so large
// (paths x steps) products stay in memory budget.
struct PathEnsemble {
    EnsembleMode mode = EnsembleMode::fixed_environment;
    int dim = 0;
    std::int64_t n_steps = 0;
    std::uint64_t base_seed = 0;
    std::vector<double> t_grid;
    std::vector<std::uint64_t> env_seeds; // per path
    std::vector<std::int32_t> start;      // per path
    std::vector<double> b;  // n_paths * t_grid.size() * dim rescaled values
    std::vector<double> x1; // n_paths * dim first-step displacement
    std::vector<double> m1; // n_paths * dim first-step phi increment
    bool has_corrector = false;

    std::int64_t n_paths() const { return static_cast<std::int64_t>(start.size()); }
    const double* b_at(std::int64_t path, std::size_t grid_index) const {
        return b.data() +
               (static_cast<std::size_t>(path) * t_grid.size() + grid_index) * dim;
    }
};

namespace detail {

inline void check_ensemble_options(const EnsembleOptions& opts) {
    if (opts.n_paths < 1) throw std::invalid_argument("ensemble: need at least one path");
    if (opts.n_steps < 1) throw std::invalid_argument("ensemble: need at least one step");
    if (opts.t_grid.empty()) throw std::invalid_argument("ensemble: empty time grid");
    for (double t : opts.t_grid)
        if (!(t >= 0.0 && t <= 1.0))
            throw std::invalid_argument("ensemble: grid times must lie in [0,1]");
}

// Walks one path and appends its checkpoints to the ensemble arrays.
inline void ensemble_walk(PathEnsemble& e, const ConductanceField& f,
                          const CorrectorField* chi, std::int32_t x0, std::int64_t n_steps,
                          std::mt19937_64& rng, std::uint64_t tag) {
    const int d = e.dim;
    WalkPath p = sample_X_path(f, x0, n_steps, rng, tag);
    std::vector<double> row = rescale_path(p, n_steps, e.t_grid);
    e.start.push_back(x0);
    e.b.insert(e.b.end(), row.begin(), row.end());
    const std::int32_t* d1 = p.displacement(1);
    for (int i = 0; i < d; ++i) e.x1.push_back(static_cast<double>(d1[i]));
    if (chi) {
        const std::int32_t s1 = p.sites[1];
        const double* ca = chi->at(x0);
        const double* cb = chi->at(s1);
        for (int i = 0; i < d; ++i)
            e.m1.push_back(static_cast<double>(d1[i]) + cb[i] - ca[i]);
    }
}

} // namespace detail

// Many walks in one environment. When a corrector is supplied its domain (the
// largest positive cluster) constrains the start sites; the walk itself never
// leaves that cluster because every positive edge from it stays inside.
inline PathEnsemble sample_x_ensemble(const ConductanceField& f, const CorrectorField* chi,
                                      const EnsembleOptions& opts) {
    detail::check_ensemble_options(opts);
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    if (chi && chi->dim != d)
        throw std::invalid_argument("sample_x_ensemble: corrector dimension mismatch");

    auto positive = label_clusters(f, 0.0);
    if (positive.largest < 0)
        throw std::invalid_argument("sample_x_ensemble: field has no positive edge");
    std::vector<std::int32_t> cluster;
    if (opts.start == StartRule::uniform_cluster) {
        for (std::int32_t s = 0; s < lat.n_sites(); ++s)
            if (positive.in_largest(s)) cluster.push_back(s);
    } else {
        if (!positive.in_largest(opts.x0))
            throw std::invalid_argument("sample_x_ensemble: start site not in the largest cluster");
        if (chi && !chi->in_domain[static_cast<std::size_t>(opts.x0)])
            throw std::invalid_argument("sample_x_ensemble: start site outside the corrector domain");
    }

    PathEnsemble e;
    e.mode = EnsembleMode::fixed_environment;
    e.dim = d;
    e.n_steps = opts.n_steps;
    e.base_seed = opts.seed;
    e.t_grid = opts.t_grid;
    e.has_corrector = chi != nullptr;
    e.env_seeds.assign(static_cast<std::size_t>(opts.n_paths), opts.env_tag);
    e.start.reserve(static_cast<std::size_t>(opts.n_paths));
    e.b.reserve(static_cast<std::size_t>(opts.n_paths) * opts.t_grid.size() * d);

    for (std::int64_t p = 0; p < opts.n_paths; ++p) {
        auto rng = make_engine(opts.seed, static_cast<std::uint64_t>(p));
        std::int32_t x0 = opts.x0;
        if (opts.start == StartRule::uniform_cluster) {
            std::uniform_int_distribution<std::size_t> pick(0, cluster.size() - 1);
            x0 = cluster[pick(rng)];
        }
        detail::ensemble_walk(e, f, chi, x0, opts.n_steps, rng, static_cast<std::uint64_t>(p));
    }
    return e;
}

// One walk in each of many independent environments; environment k draws its
// field from seed + 1 + k and its walk from make_engine(seed, k). Solving the
// corrector per environment is the expensive part, so it is optional.
inline PathEnsemble sample_annealed_ensemble(int dim, int side, Boundary boundary,
                                             const ConductanceLaw& law,
                                             const EnsembleOptions& opts,
                                             const CorrectorOptions* solve = nullptr) {
    detail::check_ensemble_options(opts);
    BoxLattice lat(dim, side, boundary);
    PathEnsemble e;
    e.mode = EnsembleMode::per_environment;
    e.dim = dim;
    e.n_steps = opts.n_steps;
    e.base_seed = opts.seed;
    e.t_grid = opts.t_grid;
    e.has_corrector = solve != nullptr;

    for (std::int64_t k = 0; k < opts.n_paths; ++k) {
        const std::uint64_t env_seed = opts.seed + 1 + static_cast<std::uint64_t>(k);
        ConductanceField f = sample_field(lat, law, env_seed);
        auto positive = label_clusters(f, 0.0);
        if (positive.largest < 0)
            throw std::runtime_error("sample_annealed_ensemble: environment " +
                                     std::to_string(k) + " has no positive edge");
        CorrectorField chi;
        if (solve) chi = solve_corrector_periodic(f, *solve);

        auto rng = make_engine(opts.seed, static_cast<std::uint64_t>(k));
        std::vector<std::int32_t> cluster;
        for (std::int32_t s = 0; s < lat.n_sites(); ++s)
            if (positive.in_largest(s)) cluster.push_back(s);
        std::uniform_int_distribution<std::size_t> pick(0, cluster.size() - 1);
        const std::int32_t x0 = cluster[pick(rng)];
        e.env_seeds.push_back(env_seed);
        detail::ensemble_walk(e, f, solve ? &chi : nullptr, x0, opts.n_steps, rng,
                              static_cast<std::uint64_t>(k));
    }
    return e;
}

// ---------------------------------------------------------------------------
// Diffusion matrix

struct DiffusionEstimate {
    int dim = 0;
    std::vector<double> d_hat; // dim*dim, symmetric
    std::vector<double> se;    // dim*dim, zero for the exact variant
    double sigma2 = 0.0;       // trace of d_hat
    double sigma2_se = 0.0;
    double step_second_moment = 0.0; // E|X_1|^2 under the same measure
    double step_second_moment_se = 0.0;
    std::int64_t samples = 0;
    bool exact = false;

    double entry(int i, int j) const { return d_hat[static_cast<std::size_t>(i) * dim + j]; }
};

// Deterministic sum over the stationary measure on the corrector domain:
// D_ij = (1/|C|) sum_x sum_q (omega_q / 2d) (e_q + Dchi)_i (e_q + Dchi)_j.
inline DiffusionEstimate diffusion_matrix_exact(const ConductanceField& f,
                                                const CorrectorField& chi) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    if (chi.dim != d)
        throw std::invalid_argument("diffusion_matrix_exact: dimension mismatch");
    DiffusionEstimate out;
    out.dim = d;
    out.exact = true;
    out.d_hat.assign(static_cast<std::size_t>(d) * d, 0.0);
    out.se.assign(static_cast<std::size_t>(d) * d, 0.0);
    const double inv_slots = 1.0 / f.slots();
    std::int64_t n_dom = 0;
    double dphi[BoxLattice::max_dim];
    for (std::int32_t s = 0; s < lat.n_sites(); ++s) {
        if (!chi.in_domain[static_cast<std::size_t>(s)]) continue;
        ++n_dom;
        const double* cs = chi.at(s);
        for (int q = 0; q < f.slots(); ++q) {
            const double w = f.weight_at(s, q);
            if (!(w > 0.0)) continue;
            const std::int32_t y = f.neighbor_at(s, q);
            if (y < 0) continue;
            const double* cy = chi.at(y);
            const int axis = ConductanceField::slot_axis(q);
            for (int i = 0; i < d; ++i)
                dphi[i] = (i == axis ? ConductanceField::slot_dir(q) : 0.0) + cy[i] - cs[i];
            const double p = w * inv_slots;
            for (int i = 0; i < d; ++i)
                for (int j = i; j < d; ++j)
                    out.d_hat[static_cast<std::size_t>(i) * d + j] += p * dphi[i] * dphi[j];
            out.step_second_moment += p; // |e_q|^2 = 1 per move
        }
    }
    if (n_dom == 0) throw std::invalid_argument("diffusion_matrix_exact: empty domain");
    const double inv_n = 1.0 / static_cast<double>(n_dom);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            out.d_hat[static_cast<std::size_t>(i) * d + j] *= inv_n;
            out.d_hat[static_cast<std::size_t>(j) * d + i] =
                out.d_hat[static_cast<std::size_t>(i) * d + j];
        }
    out.step_second_moment *= inv_n;
    for (int i = 0; i < d; ++i) out.sigma2 += out.entry(i, i);
    out.samples = n_dom;
    return out;
}

// Monte Carlo second moment of the stored first-step phi increments. The
// entries are raw (uncentered) second moments, matching the definition of D.
inline DiffusionEstimate diffusion_estimate(const PathEnsemble& e) {
    if (!e.has_corrector || e.m1.empty())
        throw std::invalid_argument(
            "diffusion_estimate: ensemble carries no first-step phi increments");
    const int d = e.dim;
    DiffusionEstimate out;
    out.dim = d;
    out.d_hat.assign(static_cast<std::size_t>(d) * d, 0.0);
    out.se.assign(static_cast<std::size_t>(d) * d, 0.0);
    std::vector<RunningMoments> pair(static_cast<std::size_t>(d) * d);
    RunningMoments trace, step2;
    for (std::int64_t p = 0; p < e.n_paths(); ++p) {
        const double* m = e.m1.data() + static_cast<std::size_t>(p) * d;
        const double* x = e.x1.data() + static_cast<std::size_t>(p) * d;
        double tr = 0.0, xx = 0.0;
        for (int i = 0; i < d; ++i) {
            tr += m[i] * m[i];
            xx += x[i] * x[i];
            for (int j = i; j < d; ++j)
                pair[static_cast<std::size_t>(i) * d + j].add(m[i] * m[j]);
        }
        trace.add(tr);
        step2.add(xx);
    }
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            const auto& pm = pair[static_cast<std::size_t>(i) * d + j];
            out.d_hat[static_cast<std::size_t>(i) * d + j] = pm.mean;
            out.d_hat[static_cast<std::size_t>(j) * d + i] = pm.mean;
            out.se[static_cast<std::size_t>(i) * d + j] = pm.stderr_mean();
            out.se[static_cast<std::size_t>(j) * d + i] = pm.stderr_mean();
        }
    out.sigma2 = trace.mean;
    out.sigma2_se = trace.stderr_mean();
    out.step_second_moment = step2.mean;
    out.step_second_moment_se = step2.stderr_mean();
    out.samples = e.n_paths();
    return out;
}

// ---------------------------------------------------------------------------
// Isotropy and normality

struct IsotropyNormality {
    int dim = 0;
    std::int64_t n = 0;
    std::vector<double> mean;            // per coordinate
    std::vector<double> var, var_se;     // per coordinate
    std::vector<double> cov;             // dim*dim sample covariance
    std::vector<double> cov_z;           // dim*dim, off-diagonal z-scores
    double diag_z = 0.0;                 // max |z| of C_ii - C_jj over pairs
    std::vector<double> skew_z, exkurt_z; // per coordinate
    std::vector<double> cw_dirs;          // 3*dim unit vectors
    std::vector<double> cw_skew_z, cw_exkurt_z; // per direction
    double max_abs_z = 0.0;
};

// Moment z-scores of a sample of d-vectors against the isotropic Gaussian
// null: off-diagonal covariances and diagonal differences scaled by their
// empirical standard errors, skewness and excess kurtosis per coordinate and
// along three random directions (the Cramer-Wold spot checks).
inline IsotropyNormality isotropy_normality_from_samples(const std::vector<double>& samples,
                                                         int d, std::mt19937_64& rng) {
    if (d < 1 || samples.size() % static_cast<std::size_t>(d) != 0)
        throw std::invalid_argument("isotropy_normality: bad sample layout");
    const std::int64_t n = static_cast<std::int64_t>(samples.size()) / d;
    if (n < 1000)
        throw std::invalid_argument("isotropy_normality: need at least 1000 samples");

    IsotropyNormality r;
    r.dim = d;
    r.n = n;
    std::vector<RunningMoments> coord(static_cast<std::size_t>(d));
    for (std::int64_t p = 0; p < n; ++p)
        for (int i = 0; i < d; ++i)
            coord[static_cast<std::size_t>(i)].add(samples[static_cast<std::size_t>(p) * d + i]);
    auto track = [&r](double z) { r.max_abs_z = std::max(r.max_abs_z, std::abs(z)); };
    for (int i = 0; i < d; ++i) {
        const auto& m = coord[static_cast<std::size_t>(i)];
        r.mean.push_back(m.mean);
        r.var.push_back(m.variance());
        r.var_se.push_back(m.variance_se());
        r.skew_z.push_back(m.skewness() / m.skewness_se());
        r.exkurt_z.push_back(m.excess_kurtosis() / m.kurtosis_se());
        track(r.skew_z.back());
        track(r.exkurt_z.back());
    }

    r.cov = covariance_matrix(samples, d);
    r.cov_z.assign(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            RunningMoments prod, diff;
            for (std::int64_t p = 0; p < n; ++p) {
                const double ci = samples[static_cast<std::size_t>(p) * d + i] - r.mean[i];
                const double cj = samples[static_cast<std::size_t>(p) * d + j] - r.mean[j];
                prod.add(ci * cj);
                diff.add(ci * ci - cj * cj);
            }
            const double zc = prod.stderr_mean() > 0.0 ? prod.mean / prod.stderr_mean() : 0.0;
            r.cov_z[static_cast<std::size_t>(i) * d + j] = zc;
            r.cov_z[static_cast<std::size_t>(j) * d + i] = zc;
            track(zc);
            const double zd = diff.stderr_mean() > 0.0 ? diff.mean / diff.stderr_mean() : 0.0;
            r.diag_z = std::max(r.diag_z, std::abs(zd));
        }
    track(r.diag_z);

    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int dir = 0; dir < 3; ++dir) {
        std::vector<double> u(static_cast<std::size_t>(d));
        double norm = 0.0;
        do {
            norm = 0.0;
            for (int i = 0; i < d; ++i) {
                u[static_cast<std::size_t>(i)] = gauss(rng);
                norm += u[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)];
            }
            norm = std::sqrt(norm);
        } while (!(norm > 1e-12));
        for (auto& v : u) v /= norm;
        RunningMoments proj;
        for (std::int64_t p = 0; p < n; ++p) {
            double s = 0.0;
            for (int i = 0; i < d; ++i)
                s += u[static_cast<std::size_t>(i)] * samples[static_cast<std::size_t>(p) * d + i];
            proj.add(s);
        }
        r.cw_dirs.insert(r.cw_dirs.end(), u.begin(), u.end());
        r.cw_skew_z.push_back(proj.skewness() / proj.skewness_se());
        r.cw_exkurt_z.push_back(proj.excess_kurtosis() / proj.kurtosis_se());
        track(r.cw_skew_z.back());
        track(r.cw_exkurt_z.back());
    }
    return r;
}

// Runs the moment tests on the ensemble's rescaled values at grid time t.
inline IsotropyNormality isotropy_normality_test(const PathEnsemble& e, double t,
                                                 std::mt19937_64& rng) {
    std::size_t g = e.t_grid.size();
    for (std::size_t i = 0; i < e.t_grid.size(); ++i)
        if (std::abs(e.t_grid[i] - t) <= 1e-12) g = i;
    if (g == e.t_grid.size())
        throw std::invalid_argument("isotropy_normality_test: time not on the ensemble grid");
    std::vector<double> samples(static_cast<std::size_t>(e.n_paths()) * e.dim);
    for (std::int64_t p = 0; p < e.n_paths(); ++p) {
        const double* row = e.b_at(p, g);
        for (int i = 0; i < e.dim; ++i)
            samples[static_cast<std::size_t>(p) * e.dim + i] = row[i];
    }
    return isotropy_normality_from_samples(samples, e.dim, rng);
}

// ---------------------------------------------------------------------------
// Variance identity

struct VarianceIdentity {
    double x1_sq = 0.0;  // E|X_1|^2
    double m1_sq = 0.0;  // E|M_1|^2
    double chi_sq = 0.0; // E|Dchi|^2
    double inner = 0.0;  // E(X_1 . Dchi)
    double defect = 0.0;       // |m1_sq - (x1_sq - chi_sq)|
    double inner_defect = 0.0; // |inner + chi_sq|
    bool strict = false;       // chi_sq > 0 and m1_sq < x1_sq
    std::int64_t domain_sites = 0;
};

// Exact stationary sums of the first-step second moments. At the energy
// minimizer the cross term satisfies E(X_1 . Dchi) = -E|Dchi|^2, so the
// three moments split exactly; the defect measures how far the finite solve
// is from that orthogonality.
inline VarianceIdentity variance_identity_check(const ConductanceField& f,
                                                const CorrectorField& chi) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    if (chi.dim != d)
        throw std::invalid_argument("variance_identity_check: dimension mismatch");
    VarianceIdentity out;
    const double inv_slots = 1.0 / f.slots();
    for (std::int32_t s = 0; s < lat.n_sites(); ++s) {
        if (!chi.in_domain[static_cast<std::size_t>(s)]) continue;
        ++out.domain_sites;
        const double* cs = chi.at(s);
        for (int q = 0; q < f.slots(); ++q) {
            const double w = f.weight_at(s, q);
            if (!(w > 0.0)) continue;
            const std::int32_t y = f.neighbor_at(s, q);
            if (y < 0) continue;
            const double* cy = chi.at(y);
            const int axis = ConductanceField::slot_axis(q);
            const double p = w * inv_slots;
            double dchi_sq = 0.0, phi_sq = 0.0;
            for (int i = 0; i < d; ++i) {
                const double dc = cy[i] - cs[i];
                const double dp = (i == axis ? ConductanceField::slot_dir(q) : 0.0) + dc;
                dchi_sq += dc * dc;
                phi_sq += dp * dp;
            }
            out.x1_sq += p;
            out.m1_sq += p * phi_sq;
            out.chi_sq += p * dchi_sq;
            out.inner += p * (cy[axis] - cs[axis]) * ConductanceField::slot_dir(q);
        }
    }
    if (out.domain_sites == 0)
        throw std::invalid_argument("variance_identity_check: empty domain");
    const double inv_n = 1.0 / static_cast<double>(out.domain_sites);
    out.x1_sq *= inv_n;
    out.m1_sq *= inv_n;
    out.chi_sq *= inv_n;
    out.inner *= inv_n;
    out.defect = std::abs(out.m1_sq - (out.x1_sq - out.chi_sq));
    out.inner_defect = std::abs(out.inner + out.chi_sq);
    out.strict = out.chi_sq > 0.0 && out.m1_sq < out.x1_sq;
    return out;
}

// ---------------------------------------------------------------------------
// The shift variable on a coordinate axis

enum class AxisShiftOutcome { ok, origin_not_in_proxy, axis_missed, domain_mismatch };

struct AxisShiftSample {
    AxisShiftOutcome outcome = AxisShiftOutcome::ok;
    std::vector<double> psi; // chi(x_1) - chi(0), valid when outcome == ok
    std::int64_t coord = 0;  // axis coordinate of the first cluster hit
};

// Psi(omega) = chi(omega, x_1(omega)) where x_1 is the first strong-cluster
// site on the positive axis from the origin. The origin must itself lie in
// the largest strong cluster, and both endpoints must sit in the corrector
// domain; every other outcome is reported rather than thrown so a sampling
// loop can count rejections.
inline AxisShiftSample axis_shift_sample(const ConductanceField& f, double alpha, int axis,
                                         const CorrectorOptions& solver = {}) {
    const BoxLattice& lat = f.lattice();
    if (axis < 0 || axis >= lat.dim())
        throw std::invalid_argument("axis_shift_sample: axis out of range");
    AxisShiftSample out;
    auto proxy = label_clusters(f, alpha);
    if (!proxy.in_largest(0)) {
        out.outcome = AxisShiftOutcome::origin_not_in_proxy;
        return out;
    }
    std::int32_t x1 = -1;
    std::int32_t s = 0;
    for (int c = 1; c < lat.side(); ++c) {
        s = lat.neighbor(s, axis, +1);
        if (s < 0) break; // free boundary ends the axis
        if (proxy.in_largest(s)) {
            x1 = s;
            out.coord = c;
            break;
        }
    }
    if (x1 < 0) {
        out.outcome = AxisShiftOutcome::axis_missed;
        return out;
    }
    CorrectorField chi = solve_corrector_periodic(f, solver);
    if (!chi.in_domain[0] || !chi.in_domain[static_cast<std::size_t>(x1)]) {
        out.outcome = AxisShiftOutcome::domain_mismatch;
        return out;
    }
    const double* c0 = chi.at(0);
    const double* c1 = chi.at(x1);
    out.psi.resize(static_cast<std::size_t>(lat.dim()));
    for (int i = 0; i < lat.dim(); ++i) out.psi[static_cast<std::size_t>(i)] = c1[i] - c0[i];
    return out;
}

struct AxisShiftOptions {
    double alpha = 0.5;
    int axis = 0;
    std::int64_t n_envs = 0;
    std::uint64_t seed = 0;
    std::int64_t attempt_factor = 20; // give up after n_envs * factor attempts
    CorrectorOptions solver;
};

struct AxisShiftResult {
    int dim = 0;
    std::vector<double> mean, se; // per coordinate of psi
    std::int64_t used = 0;
    std::int64_t origin_rejected = 0;
    std::int64_t axis_missed = 0;
    std::int64_t domain_mismatch = 0;
    double mean_distance = 0.0; // average axis coordinate of the first hit
};

// Samples independent environments (field seed = base seed + attempt index)
// until n_envs contribute a Psi value or the attempt budget runs out. The
// zero-mean prediction is that each coordinate mean is consistent with 0.
inline AxisShiftResult axis_shift_zero_mean(int dim, int side, const ConductanceLaw& law,
                                            const AxisShiftOptions& opts) {
    if (opts.n_envs < 1)
        throw std::invalid_argument("axis_shift_zero_mean: need at least one environment");
    BoxLattice lat(dim, side, Boundary::periodic);
    AxisShiftResult out;
    out.dim = dim;
    std::vector<RunningMoments> psi(static_cast<std::size_t>(dim));
    RunningMoments dist;
    const std::int64_t max_attempts = opts.n_envs * opts.attempt_factor;
    for (std::int64_t attempt = 0; attempt < max_attempts && out.used < opts.n_envs; ++attempt) {
        ConductanceField f = sample_field(lat, law, opts.seed + static_cast<std::uint64_t>(attempt));
        AxisShiftSample s = axis_shift_sample(f, opts.alpha, opts.axis, opts.solver);
        switch (s.outcome) {
            case AxisShiftOutcome::origin_not_in_proxy: ++out.origin_rejected; continue;
            case AxisShiftOutcome::axis_missed: ++out.axis_missed; continue;
            case AxisShiftOutcome::domain_mismatch: ++out.domain_mismatch; continue;
            case AxisShiftOutcome::ok: break;
        }
        ++out.used;
        for (int i = 0; i < dim; ++i) psi[static_cast<std::size_t>(i)].add(s.psi[i]);
        dist.add(static_cast<double>(s.coord));
    }
    if (out.used == 0) throw std::runtime_error("axis_shift_zero_mean: no usable environments");
    for (int i = 0; i < dim; ++i) {
        out.mean.push_back(psi[static_cast<std::size_t>(i)].mean);
        out.se.push_back(psi[static_cast<std::size_t>(i)].stderr_mean());
    }
    out.mean_distance = dist.mean;
    return out;
}

struct AxisProfile {
    int dim = 0;
    std::vector<std::int64_t> coord; // axis coordinate of the k-th intersection
    std::vector<double> psi;         // k rows of dim values, chi(x_k) - chi(0)
    std::vector<double> psi_over_k;  // same rows divided by k (1-based)
};

// Lists every strong-cluster site on the positive axis with its corrector
// value; psi/k telescopes the shift variable and should flatten toward zero
// on environments where the corrector is sublinear.
inline AxisProfile axis_intersection_profile(const ConductanceField& f,
                                             const ClusterLabeling& proxy,
                                             const CorrectorField& chi, int axis) {
    const BoxLattice& lat = f.lattice();
    if (axis < 0 || axis >= lat.dim())
        throw std::invalid_argument("axis_intersection_profile: axis out of range");
    if (!chi.in_domain[0])
        throw std::invalid_argument("axis_intersection_profile: origin outside the corrector domain");
    AxisProfile out;
    out.dim = lat.dim();
    const double* c0 = chi.at(0);
    std::int32_t s = 0;
    std::int64_t k = 0;
    for (int c = 1; c < lat.side(); ++c) {
        s = lat.neighbor(s, axis, +1);
        if (s < 0) break;
        if (!proxy.in_largest(s) || !chi.in_domain[static_cast<std::size_t>(s)]) continue;
        ++k;
        out.coord.push_back(c);
        const double* cs = chi.at(s);
        for (int i = 0; i < lat.dim(); ++i) {
            out.psi.push_back(cs[i] - c0[i]);
            out.psi_over_k.push_back((cs[i] - c0[i]) / static_cast<double>(k));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lindeberg-style truncated second moments

struct LindebergAverages {
    std::int64_t n_steps = 0;
    double eps = 0.0;
    double cutoff = 0.0;        // eps * sqrt(n)
    double avg_full = 0.0;      // time average of E_x |M_1 - M_0|^2
    double avg_truncated = 0.0; // same restricted to increments >= cutoff
    double max_increment = 0.0; // largest |e + Dchi| offered from a visited site
};

// Time-averages the conditional second moment of the phi increment along one
// trajectory, with and without the |increment| >= eps*sqrt(n) cutoff. The
// increments are bounded, so the truncated average collapses to zero once the
// cutoff clears the largest one; the numbers are reported as a descriptive
// diagnostic, not against a threshold.
inline LindebergAverages lindeberg_time_average(const ConductanceField& f,
                                                const CorrectorField& chi, std::int32_t x0,
                                                std::int64_t n_steps, double eps,
                                                std::mt19937_64& rng) {
    const BoxLattice& lat = f.lattice();
    const int d = lat.dim();
    if (chi.dim != d)
        throw std::invalid_argument("lindeberg_time_average: dimension mismatch");
    if (x0 < 0 || x0 >= lat.n_sites() || !chi.in_domain[static_cast<std::size_t>(x0)])
        throw std::invalid_argument("lindeberg_time_average: start outside the corrector domain");
    if (n_steps < 1) throw std::invalid_argument("lindeberg_time_average: need at least one step");
    if (!(eps > 0.0)) throw std::invalid_argument("lindeberg_time_average: eps must be positive");

    LindebergAverages out;
    out.n_steps = n_steps;
    out.eps = eps;
    out.cutoff = eps * std::sqrt(static_cast<double>(n_steps));
    const double inv_slots = 1.0 / f.slots();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::int32_t s = x0;
    for (std::int64_t k = 0; k < n_steps; ++k) {
        const double* cs = chi.at(s);
        for (int q = 0; q < f.slots(); ++q) {
            const double w = f.weight_at(s, q);
            if (!(w > 0.0)) continue;
            const std::int32_t y = f.neighbor_at(s, q);
            if (y < 0) continue;
            const double* cy = chi.at(y);
            const int axis = ConductanceField::slot_axis(q);
            double sq = 0.0;
            for (int i = 0; i < d; ++i) {
                const double dp =
                    (i == axis ? ConductanceField::slot_dir(q) : 0.0) + cy[i] - cs[i];
                sq += dp * dp;
            }
            const double norm = std::sqrt(sq);
            out.max_increment = std::max(out.max_increment, norm);
            out.avg_full += w * inv_slots * sq;
            if (norm >= out.cutoff) out.avg_truncated += w * inv_slots * sq;
        }
        s = step_X(f, s, unif(rng));
    }
    out.avg_full /= static_cast<double>(n_steps);
    out.avg_truncated /= static_cast<double>(n_steps);
    return out;
}

} // namespace rcm
