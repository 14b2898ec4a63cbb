// Volume growth, isoperimetry, and Nash-type functionals of the induced
// kernel: C_vol(x,a) as a grid supremum, C_iso by exact enumeration or
// randomized local search, the distance and entropy curves M(x,t), Q(x,t),
// and the differential inequalities tying them together.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcm/heat_kernel.hpp"
#include "rcm/induced_kernel.hpp"
#include "rcm/stats.hpp"
#include "rcm/walk.hpp"

namespace rcm {

// Smallest positive one-jump probability of the kernel. Backs the entropy
// floor: q_t is bounded by its inverse, so Q(x,t) >= log of this value.
inline double a_star_min_jump(const InducedKernel& K) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : K.rows)
        for (const auto& [j, w] : row)
            if (w > 0.0) best = std::min(best, w);
    if (!std::isfinite(best)) throw std::invalid_argument("a_star_min_jump: empty kernel");
    return best;
}

// Largest epsilon whose epsilon-level jump graph still spans every kernel
// site: the finite-graph reading of the percolation threshold that keeps
// all sites connected. Computed by descending Kruskal with union-find.
inline double span_threshold(const InducedKernel& K) {
    const std::size_t n = static_cast<std::size_t>(K.n());
    if (n == 0) throw std::invalid_argument("span_threshold: empty kernel");
    if (n == 1) {
        // A single site spans itself at any level up to its own jump mass.
        return K.rows[0].empty() ? 0.0 : K.rows[0][0].second;
    }
    struct E {
        double w;
        std::int32_t u, v;
    };
    std::vector<E> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& [j, w] : K.rows[i])
            if (static_cast<std::size_t>(j) > i && w > 0.0)
                edges.push_back({w, static_cast<std::int32_t>(i), j});
    std::sort(edges.begin(), edges.end(), [](const E& a, const E& b) { return a.w > b.w; });
    std::vector<std::int32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::int32_t a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    };
    std::size_t merged = 0;
    for (const E& e : edges) {
        std::int32_t ru = find(e.u), rv = find(e.v);
        if (ru == rv) continue;
        parent[static_cast<std::size_t>(ru)] = rv;
        if (++merged == n - 1) return e.w;
    }
    return 0.0; // jump graph is disconnected; no positive level spans it
}

// C_vol(x,a) = sup over s in (0,a] of s^d sum_y 2d exp(-s d(x,y)), with the
// supremum taken over a geometric grid. Unreachable sites sit at infinite
// distance and contribute nothing.
inline double c_vol_at(const InducedKernel& K, std::int32_t x, double a, int grid_points = 128) {
    if (!(a > 0.0)) throw std::invalid_argument("c_vol_at: a must be positive");
    if (grid_points < 64) throw std::invalid_argument("c_vol_at: at least 64 grid points");
    auto dist = markov_distances_from(K, x);
    const double pi = 2.0 * K.dim;
    const double ratio = std::pow(1e-6, 1.0 / (grid_points - 1));
    double best = 0.0;
    double s = a;
    for (int g = 0; g < grid_points; ++g, s *= ratio) {
        double sum = 0.0;
        for (std::int32_t dv : dist)
            if (dv >= 0) sum += pi * std::exp(-s * dv);
        best = std::max(best, std::pow(s, K.dim) * sum);
    }
    return best;
}

// Batch version over an increasing list of a; the running maximum keeps the
// output monotone, which only sharpens the grid estimate since every grid
// point for a smaller a lies inside the larger range.
inline std::vector<double> c_vol(const InducedKernel& K, std::int32_t x,
                                 const std::vector<double>& a_list, int grid_points = 128) {
    for (std::size_t i = 0; i + 1 < a_list.size(); ++i)
        if (!(a_list[i] < a_list[i + 1]))
            throw std::invalid_argument("c_vol: a_list must be strictly increasing");
    std::vector<double> out;
    double run = 0.0;
    for (double a : a_list) {
        run = std::max(run, c_vol_at(K, x, a, grid_points));
        out.push_back(run);
    }
    return out;
}

struct IsoOptions {
    double nu = 0.25;                   // mass exponent, inside (0, 1/2)
    int size_cap = 12;                  // brute-force subset size limit
    std::int64_t work_cap = 5'000'000;  // brute-force recursion budget
    int restarts = 8;                   // heuristic restarts
    int steps = 400;                    // heuristic moves per restart
};

struct IsoResult {
    double value = std::numeric_limits<double>::infinity();
    std::vector<std::int32_t> best;     // site ids, ascending
    std::string method;                 // "brute-force" or "heuristic"
    int size_cap = 0;                   // brute-force only
    std::int64_t evaluated = 0;         // candidate sets scored
    std::size_t min_size = 0;           // sites needed to meet the mass bound
    bool infeasible = false;            // no candidate met the constraints
    bool ball_clipped = false;          // B_2n(x) covered the whole component
};

namespace detail {

// Boundary-mass ratio Q(S, S^c) / pi(S)^{(d-1)/d} with pi(S) = 2d|S|.
// Both searches score candidates through this one function, so the exact
// and heuristic values are comparable to the last bit.
inline double iso_value(const InducedKernel& K, const std::vector<char>& in_set,
                        const std::vector<std::int32_t>& members) {
    double cut = 0.0;
    for (std::int32_t i : members)
        for (const auto& [j, w] : K.rows[static_cast<std::size_t>(i)])
            if (!in_set[static_cast<std::size_t>(j)]) cut += w;
    double mass = 2.0 * K.dim * static_cast<double>(members.size());
    double expo = (K.dim - 1.0) / K.dim;
    return cut / std::pow(mass, expo);
}

struct IsoScratch {
    const InducedKernel* K = nullptr;
    const std::vector<std::int32_t>* ball_rank = nullptr; // kernel idx -> rank in ball, -1 outside
    std::vector<char> in_set, banned, queued;
    std::vector<std::int32_t> members;
    std::size_t min_size = 0, cap = 0;
    std::int64_t budget = 0, used = 0, scored = 0;
    double best_value = std::numeric_limits<double>::infinity();
    std::vector<std::int32_t> best_set;
};

// Enumerate every connected subset of the ball whose lowest-ranked site is
// the current root, by branching on an ordered candidate frontier. Each set
// appears exactly once because candidates skipped at a branch stay banned
// below it.
inline void iso_enumerate(IsoScratch& sc, std::vector<std::int32_t>& frontier) {
    if (++sc.used > sc.budget)
        throw std::runtime_error("c_iso_exact: brute-force cap exceeded");
    // Only proper subsets: the full kernel has an empty complement and a
    // zero cut, which would trivialize the infimum on a finite box.
    if (sc.members.size() >= sc.min_size &&
        sc.members.size() < static_cast<std::size_t>(sc.K->n())) {
        ++sc.scored;
        double v = iso_value(*sc.K, sc.in_set, sc.members);
        if (v < sc.best_value) {
            sc.best_value = v;
            sc.best_set = sc.members;
        }
    }
    if (sc.members.size() >= sc.cap || frontier.empty()) return;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
        std::int32_t u = frontier[i];
        sc.in_set[static_cast<std::size_t>(u)] = 1;
        sc.members.push_back(u);
        std::vector<std::int32_t> next(frontier.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                                       frontier.end());
        std::vector<std::int32_t> added;
        for (const auto& [j, w] : sc.K->rows[static_cast<std::size_t>(u)]) {
            std::size_t js = static_cast<std::size_t>(j);
            if (j == u || sc.in_set[js] || sc.banned[js] || sc.queued[js]) continue;
            if ((*sc.ball_rank)[js] < 0) continue;
            sc.queued[js] = 1;
            added.push_back(j);
            next.push_back(j);
        }
        iso_enumerate(sc, next);
        for (std::int32_t j : added) sc.queued[static_cast<std::size_t>(j)] = 0;
        sc.members.pop_back();
        sc.in_set[static_cast<std::size_t>(u)] = 0;
        sc.banned[static_cast<std::size_t>(u)] = 1; // skipped here, banned below
    }
    for (std::size_t i = 0; i < frontier.size(); ++i)
        sc.banned[static_cast<std::size_t>(frontier[i])] = 0;
}

// Shared setup: the hop ball B_2n(x), the mass-derived minimum size, and
// the vacuous-restriction flag.
struct IsoBall {
    std::vector<std::int32_t> sites;      // kernel indices inside the ball
    std::vector<std::int32_t> rank;       // kernel idx -> position in sites, -1 outside
    std::size_t min_size = 0;
    bool clipped = false;
};

inline IsoBall iso_ball(const InducedKernel& K, std::int32_t x, double n, double nu) {
    if (!(n >= 1.0)) throw std::invalid_argument("c_iso: box scale n must be >= 1");
    if (!(nu > 0.0 && nu < 0.5))
        throw std::invalid_argument("c_iso: nu must lie in (0, 1/2)");
    auto dist = markov_distances_from(K, x);
    std::int32_t radius = static_cast<std::int32_t>(std::floor(2.0 * n));
    IsoBall b;
    b.rank.assign(dist.size(), -1);
    std::int64_t reachable = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] < 0) continue;
        ++reachable;
        if (dist[i] <= radius) {
            b.rank[i] = static_cast<std::int32_t>(b.sites.size());
            b.sites.push_back(static_cast<std::int32_t>(i));
        }
    }
    b.clipped = static_cast<std::int64_t>(b.sites.size()) == reachable;
    double need = std::pow(n, nu) / (2.0 * K.dim);
    b.min_size = static_cast<std::size_t>(std::max(1.0, std::ceil(need)));
    return b;
}

} // namespace detail

// Exact C_iso by enumeration of connected subsets of B_2n(x) up to the size
// cap. Exact over the enumerated range; a cap that binds is the caller's
// choice, not an approximation made here.
inline IsoResult c_iso_exact(const InducedKernel& K, std::int32_t x, double n,
                             const IsoOptions& opts = {}) {
    if (K.site_index[x] < 0) throw std::invalid_argument("c_iso_exact: site not in the kernel");
    detail::IsoBall ball = detail::iso_ball(K, x, n, opts.nu);
    if (ball.min_size > static_cast<std::size_t>(std::max(opts.size_cap, 0)))
        throw std::invalid_argument(
            "c_iso_exact: the mass bound needs sets larger than the size cap");

    IsoResult out;
    out.method = "brute-force";
    out.size_cap = opts.size_cap;
    out.min_size = ball.min_size;
    out.ball_clipped = ball.clipped;

    detail::IsoScratch sc;
    sc.K = &K;
    sc.ball_rank = &ball.rank;
    sc.in_set.assign(static_cast<std::size_t>(K.n()), 0);
    sc.banned.assign(sc.in_set.size(), 0);
    sc.queued.assign(sc.in_set.size(), 0);
    sc.min_size = ball.min_size;
    sc.cap = static_cast<std::size_t>(std::max(opts.size_cap, 0));
    sc.budget = opts.work_cap;

    // Roots in ball order; sites of lower rank stay banned so each subset is
    // rooted at its minimum.
    for (std::int32_t root : ball.sites) {
        std::size_t rs = static_cast<std::size_t>(root);
        sc.in_set[rs] = 1;
        sc.members.push_back(root);
        std::vector<std::int32_t> frontier;
        for (const auto& [j, w] : K.rows[rs]) {
            std::size_t js = static_cast<std::size_t>(j);
            if (j == root || sc.banned[js] || ball.rank[js] < 0) continue;
            sc.queued[js] = 1;
            frontier.push_back(j);
        }
        detail::iso_enumerate(sc, frontier);
        for (std::int32_t j : frontier) sc.queued[static_cast<std::size_t>(j)] = 0;
        sc.members.pop_back();
        sc.in_set[rs] = 0;
        sc.banned[rs] = 1;
    }

    out.evaluated = sc.scored;
    if (sc.scored == 0) {
        out.infeasible = true;
        return out;
    }
    out.value = sc.best_value;
    out.best.reserve(sc.best_set.size());
    for (std::int32_t i : sc.best_set) out.best.push_back(K.sites[static_cast<std::size_t>(i)]);
    std::sort(out.best.begin(), out.best.end());
    return out;
}

// Randomized local search over the same feasible family. Every candidate it
// scores is feasible and scored by the same value function as the exact
// search, so the result can only sit at or above the exact infimum. Report
// as a lower-confidence estimate, not a bound.
inline IsoResult c_iso_heuristic(const InducedKernel& K, std::int32_t x, double n,
                                 std::mt19937_64& rng, const IsoOptions& opts = {}) {
    if (K.site_index[x] < 0)
        throw std::invalid_argument("c_iso_heuristic: site not in the kernel");
    detail::IsoBall ball = detail::iso_ball(K, x, n, opts.nu);

    IsoResult out;
    out.method = "heuristic";
    out.min_size = ball.min_size;
    out.ball_clipped = ball.clipped;
    // Proper subsets only; a mass bound that demands the whole kernel has
    // no feasible candidate.
    if (ball.min_size >= static_cast<std::size_t>(K.n())) {
        out.infeasible = true;
        return out;
    }
    const std::size_t max_size = static_cast<std::size_t>(K.n()) - 1;

    std::vector<char> in_set(static_cast<std::size_t>(K.n()), 0);
    std::vector<std::int32_t> members;
    auto ball_neighbors = [&](std::int32_t i, auto&& fn) {
        for (const auto& [j, w] : K.rows[static_cast<std::size_t>(i)])
            if (j != i && ball.rank[static_cast<std::size_t>(j)] >= 0) fn(j);
    };
    // Connectivity of the candidate after removing one member, checked by a
    // walk over the remaining members only.
    auto connected_without = [&](std::int32_t drop) {
        if (members.size() <= 1) return false;
        std::vector<std::int32_t> stack;
        std::vector<char> seen(in_set.size(), 0);
        for (std::int32_t m : members)
            if (m != drop) {
                stack.push_back(m);
                seen[static_cast<std::size_t>(m)] = 1;
                break;
            }
        std::size_t found = 0;
        while (!stack.empty()) {
            std::int32_t i = stack.back();
            stack.pop_back();
            ++found;
            ball_neighbors(i, [&](std::int32_t j) {
                std::size_t js = static_cast<std::size_t>(j);
                if (j == drop || !in_set[js] || seen[js]) return;
                seen[js] = 1;
                stack.push_back(j);
            });
        }
        return found == members.size() - 1;
    };

    double current = std::numeric_limits<double>::infinity();
    std::int64_t scored = 0;
    auto score = [&]() {
        ++scored;
        double v = detail::iso_value(K, in_set, members);
        if (v < out.value) {
            out.value = v;
            out.best.clear();
            for (std::int32_t i : members)
                out.best.push_back(K.sites[static_cast<std::size_t>(i)]);
            std::sort(out.best.begin(), out.best.end());
        }
        return v;
    };

    std::uniform_int_distribution<std::size_t> pick_site(0, ball.sites.empty()
                                                                ? 0
                                                                : ball.sites.size() - 1);
    for (int r = 0; r < opts.restarts && !ball.sites.empty(); ++r) {
        // Grow a connected seed of feasible mass from a random ball site.
        std::fill(in_set.begin(), in_set.end(), 0);
        members.clear();
        std::int32_t seed = ball.sites[pick_site(rng)];
        members.push_back(seed);
        in_set[static_cast<std::size_t>(seed)] = 1;
        while (members.size() < ball.min_size && members.size() < max_size) {
            std::vector<std::int32_t> grow;
            for (std::int32_t m : members)
                ball_neighbors(m, [&](std::int32_t j) {
                    if (!in_set[static_cast<std::size_t>(j)]) grow.push_back(j);
                });
            if (grow.empty()) break; // component too small from this seed
            std::int32_t u = grow[std::uniform_int_distribution<std::size_t>(
                0, grow.size() - 1)(rng)];
            members.push_back(u);
            in_set[static_cast<std::size_t>(u)] = 1;
        }
        if (members.size() < ball.min_size) continue;
        current = score();

        for (int step = 0; step < opts.steps; ++step) {
            bool try_add = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5;
            if (try_add) {
                if (members.size() >= max_size) continue;
                std::vector<std::int32_t> grow;
                for (std::int32_t m : members)
                    ball_neighbors(m, [&](std::int32_t j) {
                        if (!in_set[static_cast<std::size_t>(j)]) grow.push_back(j);
                    });
                if (grow.empty()) continue;
                std::int32_t u = grow[std::uniform_int_distribution<std::size_t>(
                    0, grow.size() - 1)(rng)];
                members.push_back(u);
                in_set[static_cast<std::size_t>(u)] = 1;
                double v = score();
                if (v <= current) {
                    current = v;
                } else {
                    in_set[static_cast<std::size_t>(u)] = 0;
                    members.pop_back();
                }
            } else {
                if (members.size() <= ball.min_size) continue;
                std::size_t k = std::uniform_int_distribution<std::size_t>(
                    0, members.size() - 1)(rng);
                std::int32_t u = members[k];
                if (!connected_without(u)) continue;
                members.erase(members.begin() + static_cast<std::ptrdiff_t>(k));
                in_set[static_cast<std::size_t>(u)] = 0;
                double v = score();
                if (v <= current) {
                    current = v;
                } else {
                    members.push_back(u);
                    in_set[static_cast<std::size_t>(u)] = 1;
                }
            }
        }
    }

    out.evaluated = scored;
    if (scored == 0) out.infeasible = true;
    return out;
}

// Distance and entropy curves of the observation process: M(x,t) is the
// mean hop distance from the start, Q(x,t) the mean negative log-density
// against pi = 2d. Derivative series use centered three-point differences
// on the (possibly non-uniform) grid, one-sided at the ends.
struct NashCurves {
    std::int32_t x = -1;
    std::vector<double> t;
    std::vector<double> M, Q;
    std::vector<double> M_se, Q_se;     // zero for the exact method
    std::vector<double> M_prime, Q_prime;
    std::string method;                 // "exact" or "monte-carlo"
    bool q_plug_in_biased = false;      // density window truncated the plug-in
};

namespace detail {

inline std::vector<double> grid_derivative(const std::vector<double>& t,
                                           const std::vector<double>& f) {
    std::size_t n = t.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    d[0] = (f[1] - f[0]) / (t[1] - t[0]);
    d[n - 1] = (f[n - 1] - f[n - 2]) / (t[n - 1] - t[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        double h1 = t[i] - t[i - 1], h2 = t[i + 1] - t[i];
        d[i] = (-h2 / (h1 * (h1 + h2))) * f[i - 1] + ((h2 - h1) / (h1 * h2)) * f[i] +
               (h1 / (h2 * (h1 + h2))) * f[i + 1];
    }
    return d;
}

inline void validate_time_grid(const std::vector<double>& ts) {
    if (ts.empty()) throw std::invalid_argument("nash_curves: empty time grid");
    if (!(ts.front() >= 0.0)) throw std::invalid_argument("nash_curves: negative times");
    for (std::size_t i = 0; i + 1 < ts.size(); ++i)
        if (!(ts[i] < ts[i + 1]))
            throw std::invalid_argument("nash_curves: time grid must be strictly increasing");
}

} // namespace detail

inline NashCurves nash_curves_exact(const InducedKernel& K, std::int32_t x,
                                    const std::vector<double>& ts) {
    detail::validate_time_grid(ts);
    if (K.site_index[x] < 0)
        throw std::invalid_argument("nash_curves_exact: site not in the kernel");
    auto dist = markov_distances_from(K, x);
    const double pi = 2.0 * K.dim;

    NashCurves c;
    c.x = x;
    c.t = ts;
    c.method = "exact";
    for (double t : ts) {
        auto row = y_row_exact(K, x, t);
        double m = 0.0, q = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (row[i] <= 0.0) continue;
            m += row[i] * static_cast<double>(dist[i]);
            q -= row[i] * std::log(row[i] / pi);
        }
        c.M.push_back(m);
        c.Q.push_back(q);
        c.M_se.push_back(0.0);
        c.Q_se.push_back(0.0);
    }
    c.M_prime = detail::grid_derivative(c.t, c.M);
    c.Q_prime = detail::grid_derivative(c.t, c.Q);
    return c;
}

// Monte Carlo curves: M from sampled paths, Q as the sample mean of
// -log q_t(x, Y_t) with the density plugged in from a windowed exact row.
// When the window clips, the plug-in is biased and labeled so.
inline NashCurves nash_curves_mc(const InducedKernel& K, std::int32_t x,
                                 const std::vector<double>& ts, std::int64_t samples,
                                 std::mt19937_64& rng, std::int64_t support_cap = 200000) {
    detail::validate_time_grid(ts);
    if (samples <= 0) throw std::invalid_argument("nash_curves_mc: need a sample budget");
    if (K.site_index[x] < 0)
        throw std::invalid_argument("nash_curves_mc: site not in the kernel");
    auto dist = markov_distances_from(K, x);
    const double pi = 2.0 * K.dim;
    const double t_max = ts.back();

    std::vector<detail::WindowedRow> rows;
    rows.reserve(ts.size());
    bool clipped = false;
    for (double t : ts) {
        rows.push_back(detail::y_row_windowed(K, x, t, 1e-15, support_cap));
        clipped = clipped || rows.back().clipped;
    }

    std::vector<RunningMoments> m_acc(ts.size()), q_acc(ts.size());
    for (std::int64_t i = 0; i < samples; ++i) {
        auto path = sample_Y(K, x, t_max, rng);
        for (std::size_t j = 0; j < ts.size(); ++j) {
            std::int32_t yi = K.site_index[path.site_at(ts[j])];
            m_acc[j].add(static_cast<double>(dist[static_cast<std::size_t>(yi)]));
            double qv = rows[j].prob[static_cast<std::size_t>(yi)] / pi;
            // A sampled site carries positive mass unless the window clipped
            // its share away; floor to keep the log finite in that case.
            q_acc[j].add(-std::log(std::max(qv, 1e-300)));
        }
    }

    NashCurves c;
    c.x = x;
    c.t = ts;
    c.method = "monte-carlo";
    c.q_plug_in_biased = clipped;
    for (std::size_t j = 0; j < ts.size(); ++j) {
        c.M.push_back(m_acc[j].mean);
        c.M_se.push_back(m_acc[j].stderr_mean());
        c.Q.push_back(q_acc[j].mean);
        c.Q_se.push_back(q_acc[j].stderr_mean());
    }
    c.M_prime = detail::grid_derivative(c.t, c.M);
    c.Q_prime = detail::grid_derivative(c.t, c.Q);
    return c;
}

// Differential-inequality report. Inequality (1) compares d log M against
// Q - 1 - C_vol(x, 1/M) pointwise; it is vacuous where M = 0 and skipped
// there. Inequality (2) compares centered-difference derivatives, with the
// differencing error bounded by Richardson extrapolation across three
// nested step sizes; failing to converge under halving is an error, not a
// verdict.
struct NashInequalityOptions {
    double t_min = 0.5;
    double t_max = 8.0;
    int points = 9;           // coarse grid size, interior points get checked
    double slack_tol = 1e-6;  // allowance past the differencing bound
    int vol_grid = 128;
    double c2 = 0.0, c3 = 1.0, A = 1.0; // fitted reporting constants for A'(x,t)
};

struct NashInequalityReport {
    std::vector<double> t;          // interior coarse-grid times
    std::vector<double> slack1;     // d log M + 1 + C_vol(x,1/M) - Q; NaN where M = 0
    std::vector<double> slack2;     // finest Q' - M'^2
    std::vector<double> bound2;     // differencing-error bound per point
    std::vector<double> m_over_sqrt_t;
    std::vector<double> a_prime;    // c2 + c3 (log A + C_vol(x, t^{-1/2}))
    bool ok1 = true;                // slack1 >= -slack_tol wherever defined
    bool ok2 = true;                // slack2 >= -(bound2 + slack_tol) everywhere
    double worst2 = 0.0;            // min over points of slack2 + bound2
};

inline NashInequalityReport check_nash_inequalities(const InducedKernel& K, std::int32_t x,
                                                    const NashInequalityOptions& opts = {}) {
    if (!(opts.t_min > 0.0 && opts.t_max > opts.t_min))
        throw std::invalid_argument("check_nash_inequalities: bad time range");
    if (opts.points < 3)
        throw std::invalid_argument("check_nash_inequalities: need at least 3 grid points");

    const int P = opts.points;
    const double h = (opts.t_max - opts.t_min) / (P - 1);
    auto dist = markov_distances_from(K, x);
    const double pi = 2.0 * K.dim;

    // One grid at quarter spacing serves every difference level: coarse
    // point i sits at fine index 4i, and the h, h/2, h/4 stencils read
    // offsets 4, 2, 1 from there.
    const int n4 = 4 * (P - 1) + 1;
    std::vector<double> M4(static_cast<std::size_t>(n4)), Q4(static_cast<std::size_t>(n4));
    for (int j = 0; j < n4; ++j) {
        double t = opts.t_min + (opts.t_max - opts.t_min) * j / (n4 - 1);
        auto row = y_row_exact(K, x, t);
        double m = 0.0, q = 0.0;
        for (std::size_t y = 0; y < row.size(); ++y) {
            if (row[y] <= 0.0) continue;
            m += row[y] * static_cast<double>(dist[y]);
            q -= row[y] * std::log(row[y] / pi);
        }
        M4[static_cast<std::size_t>(j)] = m;
        Q4[static_cast<std::size_t>(j)] = q;
    }
    auto slack2 = [&](int i, int off) {
        std::size_t c = static_cast<std::size_t>(4 * i);
        double dt = 2.0 * h * off / 4.0;
        double mp = (M4[c + static_cast<std::size_t>(off)] -
                     M4[c - static_cast<std::size_t>(off)]) /
                    dt;
        double qp = (Q4[c + static_cast<std::size_t>(off)] -
                     Q4[c - static_cast<std::size_t>(off)]) /
                    dt;
        return qp - mp * mp;
    };

    std::vector<double> s_h, s_h2, s_h4;
    for (int i = 1; i + 1 < P; ++i) {
        s_h.push_back(slack2(i, 4));
        s_h2.push_back(slack2(i, 2));
        s_h4.push_back(slack2(i, 1));
    }
    double d1 = 0.0, d2 = 0.0;
    for (std::size_t i = 0; i < s_h.size(); ++i) {
        d1 = std::max(d1, std::abs(s_h[i] - s_h2[i]));
        d2 = std::max(d2, std::abs(s_h2[i] - s_h4[i]));
    }
    if (d2 > d1 + 1e-12)
        throw std::runtime_error(
            "check_nash_inequalities: grid too coarse for stable derivatives "
            "(non-convergent halving)");

    NashInequalityReport rep;
    rep.worst2 = std::numeric_limits<double>::infinity();
    for (int i = 1; i + 1 < P; ++i) {
        double t = opts.t_min + i * h;
        std::size_t k = static_cast<std::size_t>(i - 1);
        double bound = (4.0 / 3.0) * std::abs(s_h4[k] - s_h2[k]);
        rep.t.push_back(t);
        rep.slack2.push_back(s_h4[k]);
        rep.bound2.push_back(bound);
        if (s_h4[k] < -(bound + opts.slack_tol)) rep.ok2 = false;
        rep.worst2 = std::min(rep.worst2, s_h4[k] + bound);

        // Pointwise inequality (1) and the A' reporting row at the same t.
        std::size_t c = static_cast<std::size_t>(4 * i);
        double M = M4[c];
        double Q = Q4[c];
        if (M > 0.0) {
            double cv = c_vol_at(K, x, 1.0 / M, opts.vol_grid);
            double s1 = K.dim * std::log(M) + 1.0 + cv - Q;
            rep.slack1.push_back(s1);
            if (s1 < -opts.slack_tol) rep.ok1 = false;
        } else {
            rep.slack1.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        rep.m_over_sqrt_t.push_back(M / std::sqrt(t));
        rep.a_prime.push_back(opts.c2 +
                              opts.c3 * (std::log(opts.A) +
                                         c_vol_at(K, x, 1.0 / std::sqrt(t), opts.vol_grid)));
    }
    return rep;
}

// Plot-annotation thresholds from configured constants; nothing here is
// verified, the values only mark where the asymptotic regime is expected
// to begin.
struct AnnotationThresholds {
    double t_x = 0.0;
    double T_x = 0.0;
};

inline AnnotationThresholds annotation_thresholds(double c1, double nu, double A,
                                                  double a_star, double c_iso_value, int dim) {
    if (!(c1 > 1.0)) throw std::invalid_argument("annotation_thresholds: c1 must exceed 1");
    if (!(nu > 0.0 && nu < 0.5))
        throw std::invalid_argument("annotation_thresholds: nu must lie in (0, 1/2)");
    AnnotationThresholds a;
    a.t_x = c1 * std::pow(std::log(std::max(c_iso_value, c1)), 1.0 / (1.0 - 2.0 * nu));
    double burn = (1.0 / dim) * std::pow(A * a_star, -4.0 / dim);
    a.T_x = std::max(burn, a.t_x * std::log(a.t_x)); // t_x > 0 since c1 > 1
    return a;
}

} // namespace rcm
