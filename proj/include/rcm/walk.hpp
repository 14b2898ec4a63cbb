// Path samplers: the lazy discrete walk X on the positive-edge graph and the
// continuous-time observation Y of the induced kernel.
//
// One uniform drives an X step: u*2d picks the slot, the fractional part
// accepts the move with probability omega (weights live in [0,1]), and a
// rejected or boundary-blocked slot keeps the walker in place, which is the
// lazy holding step. Paths carry unwrapped displacements so torus winding
// never contaminates long-time statistics.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "rcm/field.hpp"
#include "rcm/induced_kernel.hpp"

namespace rcm {

// One step of the lazy walk from s, driven by one uniform in [0,1).
inline std::int32_t step_X(const ConductanceField& f, std::int32_t s, double u) {
    const int slots = f.slots();
    double scaled = u * slots;
    int q = static_cast<int>(scaled);
    if (q >= slots) q = slots - 1; // guards u just below 1 against roundoff
    if (scaled - q < f.weight_at(s, q)) {
        std::int32_t v = f.neighbor_at(s, q);
        if (v >= 0) return v;
    }
    return s;
}

// Exact one-step distribution at s: (stay probability, per-slot move
// probabilities omega/2d in slot order).
struct StepDistribution {
    double stay = 0.0;
    std::vector<double> move; // by slot; 0 for blocked slots
};

inline StepDistribution step_distribution(const ConductanceField& f, std::int32_t s) {
    StepDistribution d;
    d.move.resize(static_cast<std::size_t>(f.slots()));
    const double inv = 1.0 / f.slots();
    double total = 0.0;
    for (int q = 0; q < f.slots(); ++q) {
        double p = f.weight_at(s, q) * inv;
        d.move[static_cast<std::size_t>(q)] = p;
        total += p;
    }
    d.stay = 1.0 - total;
    return d;
}

struct WalkPath {
    int dim = 0;
    std::int32_t start = 0;
    std::vector<std::int32_t> sites; // n_steps+1 entries, sites[0] == start
    std::vector<std::int32_t> disp;  // unwrapped displacement, (n_steps+1)*dim
    std::uint64_t seed = 0;

    std::int64_t n_steps() const { return static_cast<std::int64_t>(sites.size()) - 1; }
    const std::int32_t* displacement(std::int64_t step) const {
        return disp.data() + static_cast<std::size_t>(step) * dim;
    }
};

inline WalkPath sample_X_path(const ConductanceField& f, std::int32_t x0, std::int64_t n_steps,
                              std::mt19937_64& rng, std::uint64_t seed_tag = 0) {
    const BoxLattice& lat = f.lattice();
    if (x0 < 0 || x0 >= lat.n_sites())
        throw std::invalid_argument("sample_X_path: start site out of range");
    if (n_steps < 0) throw std::invalid_argument("sample_X_path: negative step count");
    const int d = lat.dim();
    WalkPath p;
    p.dim = d;
    p.start = x0;
    p.seed = seed_tag;
    p.sites.reserve(static_cast<std::size_t>(n_steps) + 1);
    p.disp.assign(static_cast<std::size_t>(n_steps + 1) * d, 0);
    p.sites.push_back(x0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::int32_t s = x0;
    const int slots = f.slots();
    for (std::int64_t k = 1; k <= n_steps; ++k) {
        double u = unif(rng);
        double scaled = u * slots;
        int q = static_cast<int>(scaled);
        if (q >= slots) q = slots - 1;
        std::int32_t* cur = p.disp.data() + static_cast<std::size_t>(k) * d;
        const std::int32_t* prev = p.disp.data() + static_cast<std::size_t>(k - 1) * d;
        for (int m = 0; m < d; ++m) cur[m] = prev[m];
        if (scaled - q < f.weight_at(s, q)) {
            std::int32_t v = f.neighbor_at(s, q);
            if (v >= 0) {
                s = v;
                cur[ConductanceField::slot_axis(q)] +=
                    static_cast<std::int32_t>(ConductanceField::slot_dir(q));
            }
        }
        p.sites.push_back(s);
    }
    return p;
}

// Continuous-time observation of the induced kernel: unit-rate jump clock,
// jump targets drawn from the kernel row (self-jumps included, they simply
// hold). Sites are recorded after each clock ring up to the horizon.
struct YPath {
    std::int32_t start = 0;
    double horizon = 0.0;
    std::vector<double> times;        // ring times, ascending, <= horizon
    std::vector<std::int32_t> sites;  // site after each ring

    std::int32_t site_at(double t) const {
        std::int32_t s = start;
        for (std::size_t i = 0; i < times.size() && times[i] <= t; ++i) s = sites[i];
        return s;
    }
};

inline YPath sample_Y(const InducedKernel& K, std::int32_t x0, double horizon,
                      std::mt19937_64& rng) {
    if (K.site_index[x0] < 0)
        throw std::invalid_argument("sample_Y: start site not in the kernel");
    if (!(horizon >= 0.0)) throw std::invalid_argument("sample_Y: bad horizon");
    YPath p;
    p.start = x0;
    p.horizon = horizon;
    std::exponential_distribution<double> exp1(1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double t = 0.0;
    std::int32_t cur = K.site_index[x0];
    while (true) {
        t += exp1(rng);
        if (t > horizon) break;
        double u = unif(rng);
        const auto& row = K.rows[static_cast<std::size_t>(cur)];
        double acc = 0.0;
        std::int32_t next = cur;
        for (const auto& [j, w] : row) {
            acc += w;
            if (u < acc) {
                next = j;
                break;
            }
        }
        cur = next;
        p.times.push_back(t);
        p.sites.push_back(K.sites[static_cast<std::size_t>(cur)]);
    }
    return p;
}

// Monte Carlo estimate of one kernel row: run the walk from x until its
// first return to the strong cluster, many times. Used as the independent
// check against the absorption solve.
struct RowEstimate {
    std::vector<std::int32_t> targets; // site ids, ascending
    std::vector<std::int64_t> counts;
    std::int64_t trials = 0;
};

inline RowEstimate estimate_kernel_row_mc(const ConductanceField& f,
                                          const ClusterLabeling& strong, std::int32_t x,
                                          std::int64_t trials, std::mt19937_64& rng,
                                          std::int64_t step_guard = 1u << 22) {
    if (!strong.in_largest(x))
        throw std::invalid_argument("estimate_kernel_row_mc: start not in the strong cluster");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<std::int32_t, std::int64_t>> tally;
    for (std::int64_t i = 0; i < trials; ++i) {
        std::int32_t s = x;
        std::int64_t guard = 0;
        do {
            s = step_X(f, s, unif(rng));
            if (++guard > step_guard)
                throw std::runtime_error("estimate_kernel_row_mc: excursion guard tripped");
        } while (!strong.in_largest(s));
        bool found = false;
        for (auto& [t, c] : tally)
            if (t == s) {
                ++c;
                found = true;
                break;
            }
        if (!found) tally.emplace_back(s, 1);
    }
    std::sort(tally.begin(), tally.end());
    RowEstimate est;
    est.trials = trials;
    for (const auto& [t, c] : tally) {
        est.targets.push_back(t);
        est.counts.push_back(c);
    }
    return est;
}

} // namespace rcm
