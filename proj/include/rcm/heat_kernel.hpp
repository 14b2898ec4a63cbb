// Heat-kernel machinery: exact distributions of the discrete walk X by
// vector iteration, exact distributions of the continuous observation Y by
// Poisson mixing of kernel powers, Monte Carlo return probabilities, the
// rescaled return-probability curve, and diffusive-bound tables.
//
// Throughout, the reference measure is pi(x) = 2d, so the density form of a
// distribution is q_t(x,y) = P(Y_t = y) / 2d.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcm/cluster.hpp"
#include "rcm/induced_kernel.hpp"
#include "rcm/stats.hpp"
#include "rcm/walk.hpp"

namespace rcm {

// Exact-method guards. The vector iterations are linear per step, but the
// exact contract is still capped to keep runtimes and memory predictable.
inline constexpr std::int32_t exact_site_cap = 2000;
inline constexpr double exact_time_cap = 700.0; // exp(-t) must stay normal

// Distribution of X after n lazy steps, started at x0. Vector of site
// probabilities over the whole box (zero off the reachable set).
inline std::vector<double> x_distribution_exact(const ConductanceField& f, std::int32_t x0,
                                                std::int64_t n) {
    const BoxLattice& lat = f.lattice();
    if (x0 < 0 || x0 >= lat.n_sites())
        throw std::invalid_argument("x_distribution_exact: start site out of range");
    if (n < 0) throw std::invalid_argument("x_distribution_exact: negative step count");
    if (lat.n_sites() > exact_site_cap)
        throw std::invalid_argument("x_distribution_exact: box exceeds the exact-method cap");
    const double inv2d = 1.0 / (2.0 * lat.dim());
    std::vector<double> v(static_cast<std::size_t>(lat.n_sites()), 0.0);
    std::vector<double> next(v.size());
    v[static_cast<std::size_t>(x0)] = 1.0;
    for (std::int64_t k = 0; k < n; ++k) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::int32_t s = 0; s < lat.n_sites(); ++s) {
            double mass = v[static_cast<std::size_t>(s)];
            if (mass == 0.0) continue;
            double moved = 0.0;
            for (int q = 0; q < f.slots(); ++q) {
                double w = f.weight_at(s, q);
                if (w <= 0.0) continue;
                double p = w * inv2d;
                next[static_cast<std::size_t>(f.neighbor_at(s, q))] += mass * p;
                moved += p;
            }
            next[static_cast<std::size_t>(s)] += mass * (1.0 - moved);
        }
        v.swap(next);
    }
    return v;
}

inline double x_return_probability_exact(const ConductanceField& f, std::int32_t x0,
                                         std::int64_t n) {
    return x_distribution_exact(f, x0, n)[static_cast<std::size_t>(x0)];
}

// Distribution of Y_t started at site x, by Poisson mixing: P(Y_t = .) =
// sum_k e^{-t} t^k / k! * w^k(x, .), truncated once the Poisson weights have
// spent all but `tail` of their mass. Indexed by kernel index.
inline std::vector<double> y_row_exact(const InducedKernel& K, std::int32_t x, double t,
                                       double tail = 1e-15) {
    if (K.site_index[x] < 0)
        throw std::invalid_argument("y_row_exact: site not in the kernel");
    if (!(t >= 0.0)) throw std::invalid_argument("y_row_exact: negative time");
    if (t > exact_time_cap)
        throw std::invalid_argument("y_row_exact: time exceeds the exact-method cap");
    if (K.n() > exact_site_cap)
        throw std::invalid_argument("y_row_exact: kernel exceeds the exact-method cap");

    const std::size_t n = static_cast<std::size_t>(K.n());
    std::vector<double> v(n, 0.0), next(n), acc(n, 0.0);
    v[static_cast<std::size_t>(K.site_index[x])] = 1.0;
    double pmf = std::exp(-t);
    double cum = pmf;
    for (std::size_t i = 0; i < n; ++i) acc[i] = pmf * v[i];
    std::int64_t k = 0;
    while (cum < 1.0 - tail) {
        ++k;
        // One kernel application: next = w^T v, and w is symmetric.
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t xi = 0; xi < n; ++xi) {
            double mass = v[xi];
            if (mass == 0.0) continue;
            for (const auto& [yi, w] : K.rows[xi])
                next[static_cast<std::size_t>(yi)] += mass * w;
        }
        v.swap(next);
        pmf *= t / static_cast<double>(k);
        cum += pmf;
        for (std::size_t i = 0; i < n; ++i) acc[i] += pmf * v[i];
    }
    return acc;
}

// Density form against pi = 2d.
inline std::vector<double> q_row_exact(const InducedKernel& K, std::int32_t x, double t,
                                       double tail = 1e-15) {
    auto row = y_row_exact(K, x, t, tail);
    const double inv_pi = 1.0 / (2.0 * K.dim);
    for (double& v : row) v *= inv_pi;
    return row;
}

namespace detail {

// Poisson mixing restricted to a hop window around the start, for kernels
// too large for the full exact row. The window covers every site reachable
// within the truncated Poisson horizon when possible; otherwise mass
// leaving the window is dropped and the row is flagged as clipped, which
// biases -log q upward.
struct WindowedRow {
    std::vector<double> prob; // by kernel index
    bool clipped = false;
};

inline WindowedRow y_row_windowed(const InducedKernel& K, std::int32_t x, double t,
                                  double tail = 1e-15, std::int64_t support_cap = 200000) {
    if (K.site_index[x] < 0)
        throw std::invalid_argument("y_row_windowed: site not in the kernel");
    if (!(t >= 0.0)) throw std::invalid_argument("y_row_windowed: negative time");
    if (t > exact_time_cap)
        throw std::invalid_argument("y_row_windowed: time exceeds the exact-method cap");

    // Hop horizon: the truncated Poisson sum never mixes more jumps than
    // this, so mass cannot leave the matching hop ball.
    std::int64_t k_max = static_cast<std::int64_t>(std::ceil(t + 12.0 * std::sqrt(t) + 30.0));
    auto dist = markov_distances_from(K, x);
    std::int32_t max_d = 0;
    for (std::int32_t dv : dist) max_d = std::max(max_d, dv);
    std::vector<std::int64_t> in_radius(static_cast<std::size_t>(max_d) + 1, 0);
    for (std::int32_t dv : dist)
        if (dv >= 0) ++in_radius[static_cast<std::size_t>(dv)];
    std::int64_t cum_sites = 0;
    std::int32_t radius = 0;
    for (std::size_t r = 0; r < in_radius.size(); ++r) {
        if (cum_sites + in_radius[r] > support_cap) break;
        cum_sites += in_radius[r];
        radius = static_cast<std::int32_t>(r);
    }
    WindowedRow out;
    out.clipped = radius < k_max && radius < max_d;

    std::vector<std::int32_t> window;
    window.reserve(static_cast<std::size_t>(cum_sites));
    for (std::size_t i = 0; i < dist.size(); ++i)
        if (dist[i] >= 0 && dist[i] <= radius) window.push_back(static_cast<std::int32_t>(i));

    const std::size_t nk = static_cast<std::size_t>(K.n());
    std::vector<double> v(nk, 0.0), next(nk, 0.0), acc(nk, 0.0);
    const std::size_t start = static_cast<std::size_t>(K.site_index[x]);
    v[start] = 1.0;
    double pmf = std::exp(-t);
    double cum = pmf;
    acc[start] = pmf;
    for (std::int64_t k = 1; cum < 1.0 - tail && k <= k_max + 8; ++k) {
        for (std::int32_t i : window) {
            double mass = v[static_cast<std::size_t>(i)];
            if (mass == 0.0) continue;
            for (const auto& [j, w] : K.rows[static_cast<std::size_t>(i)])
                if (dist[static_cast<std::size_t>(j)] <= radius)
                    next[static_cast<std::size_t>(j)] += mass * w; // window edge drops the rest
        }
        pmf *= t / static_cast<double>(k);
        cum += pmf;
        for (std::int32_t i : window) {
            std::size_t is = static_cast<std::size_t>(i);
            v[is] = next[is];
            next[is] = 0.0;
            acc[is] += pmf * v[is];
        }
    }
    out.prob = std::move(acc);
    return out;
}

} // namespace detail

// Monte Carlo return probability of X after n steps.
inline BinomialEstimate mc_return_probability(const ConductanceField& f, std::int32_t x0,
                                              std::int64_t n_steps, std::int64_t samples,
                                              std::mt19937_64& rng) {
    if (x0 < 0 || x0 >= f.lattice().n_sites())
        throw std::invalid_argument("mc_return_probability: start site out of range");
    if (n_steps < 0 || samples <= 0)
        throw std::invalid_argument("mc_return_probability: bad step or sample count");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < samples; ++i) {
        std::int32_t s = x0;
        for (std::int64_t k = 0; k < n_steps; ++k) s = step_X(f, s, unif(rng));
        if (s == x0) ++hits;
    }
    BinomialEstimate est;
    est.count = hits;
    est.trials = samples;
    return est;
}

// Rescaled return-probability curve n -> n^{d/2} P(X_{2n} = x0), with
// standard errors. Flags any point statistically indistinguishable from 0;
// throws when the largest n sees no return at all, since positivity cannot
// then be certified at any confidence.
struct HeatLowerBound {
    std::vector<std::int64_t> n;
    std::vector<double> value;
    std::vector<double> std_error;
    std::vector<std::int64_t> successes;
    std::int64_t samples = 0;
    bool indistinguishable_from_zero = false;
};

inline HeatLowerBound heat_lower_bound_curve(const ConductanceField& f,
                                             const ClusterLabeling& proxy, std::int32_t x0,
                                             const std::vector<std::int64_t>& n_list,
                                             std::int64_t samples, std::mt19937_64& rng) {
    if (!proxy.in_largest(x0))
        throw std::invalid_argument(
            "heat_lower_bound_curve: start site is outside the cluster proxy");
    const int d = f.lattice().dim();
    HeatLowerBound out;
    out.samples = samples;
    for (std::int64_t n : n_list) {
        if (n <= 0) throw std::invalid_argument("heat_lower_bound_curve: n must be positive");
        auto est = mc_return_probability(f, x0, 2 * n, samples, rng);
        double scale = std::pow(static_cast<double>(n), 0.5 * d);
        double p = est.p_hat();
        double se = est.se();
        out.n.push_back(n);
        out.value.push_back(scale * p);
        out.std_error.push_back(scale * se);
        out.successes.push_back(est.count);
        if (p - 3.0 * se <= 0.0) out.indistinguishable_from_zero = true;
    }
    if (!out.n.empty() && out.successes.back() == 0)
        throw std::runtime_error(
            "heat_lower_bound_curve: no return observed at the largest n; "
            "sample budget insufficient");
    return out;
}

// Diffusive-bound table: for each start site and observation time, the
// scaled mean displacement E d(x, Y_t)/sqrt(t) in the kernel-graph metric
// and in Euclidean length, and the scaled return mass t^{d/2} P(Y_t = x).
struct DiffusiveBound {
    std::vector<std::int32_t> site;
    std::vector<double> t;
    std::vector<double> graph_mean; // E d(x,Y_t)/sqrt(t)
    std::vector<double> graph_se;
    std::vector<double> euclid_mean; // E |Y_t - x|_2/sqrt(t)
    std::vector<double> euclid_se;
    std::vector<double> return_mass; // t^{d/2} P(Y_t = x)
    std::vector<double> return_se;
    double sup_graph = 0.0;
    double sup_euclid = 0.0;
    double sup_return = 0.0;
};

inline DiffusiveBound diffusive_bound_check(const InducedKernel& K,
                                            const std::vector<std::int32_t>& sites,
                                            const std::vector<double>& t_list,
                                            std::int64_t samples, std::mt19937_64& rng) {
    if (sites.empty() || t_list.empty() || samples <= 0)
        throw std::invalid_argument("diffusive_bound_check: empty input");
    const double n_scale = 0.5 * K.side; // half-box plays the role of n
    for (double t : t_list)
        if (!(t >= n_scale && t <= n_scale * n_scale))
            throw std::invalid_argument(
                "diffusive_bound_check: time " + std::to_string(t) +
                " outside the diffusive window [n, n^2], n = " + std::to_string(n_scale));
    BoxLattice lat(K.dim, K.side, K.boundary);
    const double t_max = *std::max_element(t_list.begin(), t_list.end());

    DiffusiveBound out;
    int delta[BoxLattice::max_dim];
    for (std::int32_t x : sites) {
        if (K.site_index[x] < 0)
            throw std::invalid_argument("diffusive_bound_check: site not in the kernel");
        auto dist = markov_distances_from(K, x);
        std::vector<RunningMoments> graph(t_list.size()), euclid(t_list.size());
        std::vector<std::int64_t> returns(t_list.size(), 0);
        for (std::int64_t i = 0; i < samples; ++i) {
            auto path = sample_Y(K, x, t_max, rng);
            for (std::size_t j = 0; j < t_list.size(); ++j) {
                std::int32_t y = path.site_at(t_list[j]);
                graph[j].add(static_cast<double>(
                    dist[static_cast<std::size_t>(K.site_index[y])]));
                lat.displacement(x, y, delta);
                double n2 = 0.0;
                for (int k = 0; k < K.dim; ++k)
                    n2 += static_cast<double>(delta[k]) * static_cast<double>(delta[k]);
                euclid[j].add(std::sqrt(n2));
                if (y == x) ++returns[static_cast<std::size_t>(j)];
            }
        }
        for (std::size_t j = 0; j < t_list.size(); ++j) {
            double rt = std::sqrt(t_list[j]);
            double td2 = std::pow(t_list[j], 0.5 * K.dim);
            BinomialEstimate ret;
            ret.count = returns[j];
            ret.trials = samples;
            out.site.push_back(x);
            out.t.push_back(t_list[j]);
            out.graph_mean.push_back(graph[j].mean / rt);
            out.graph_se.push_back(graph[j].stderr_mean() / rt);
            out.euclid_mean.push_back(euclid[j].mean / rt);
            out.euclid_se.push_back(euclid[j].stderr_mean() / rt);
            out.return_mass.push_back(td2 * ret.p_hat());
            out.return_se.push_back(td2 * ret.se());
            out.sup_graph = std::max(out.sup_graph, out.graph_mean.back());
            out.sup_euclid = std::max(out.sup_euclid, out.euclid_mean.back());
            out.sup_return = std::max(out.sup_return, out.return_mass.back());
        }
    }
    return out;
}

} // namespace rcm
