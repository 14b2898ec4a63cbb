#pragma once

// Compares the jump-graph metric of the induced kernel against the ambient
// lattice norm. For every kernel site y in an annulus around the origin we
// form the ratio d(0,y) / |y|, where d is the hop distance on the kernel's
// jump graph and |y| is the l-infinity displacement. The comparison bins by
// integer |y|, tracks the minimum and mean ratio per bin, and counts how
// often d(0,y) <= rho * |y| for a configured rho (a "shortcut" the kernel's
// long-range jumps across holes could in principle create). Results from
// independent environments merge bin by bin.
//
// The annulus is capped at the central half-box (side / 4 in l-infinity) so
// that periodic wraparound cannot shorten the ambient norm relative to the
// infinite-lattice one.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcm/induced_kernel.hpp"
#include "rcm/lattice.hpp"

namespace rcm {

struct DistanceComparisonOptions {
    double rho = 0.1; // shortcut threshold: count pairs with d <= rho * |y|
    int min_abs = 1;  // smallest |y| included
    int max_abs = 0;  // largest |y|; 0 means the half-box cap side / 4
};

struct DistanceBin {
    int abs_x = 0;
    std::int64_t pairs = 0;       // kernel sites at this |y|
    std::int64_t violations = 0;  // pairs with d <= rho * |y|
    std::int64_t unreachable = 0; // pairs with no jump-graph path
    double min_ratio = std::numeric_limits<double>::infinity();
    double sum_ratio = 0.0;

    std::int64_t reached() const { return pairs - unreachable; }
    double mean_ratio() const {
        return reached() > 0 ? sum_ratio / static_cast<double>(reached()) : 0.0;
    }
    double violation_freq() const {
        return pairs > 0 ? static_cast<double>(violations) / static_cast<double>(pairs) : 0.0;
    }
};

struct DistanceComparison {
    double rho = 0.0;
    int min_abs = 0;
    int max_abs = 0;
    std::int64_t environments = 0;     // merged environments with a usable origin
    bool origin_in_kernel = false;     // whether any contributing origin was usable
    std::vector<DistanceBin> bins;      // index 0 holds |y| = min_abs

    std::int64_t empty_bins() const {
        std::int64_t n = 0;
        for (const DistanceBin& b : bins) n += (b.pairs == 0) ? 1 : 0;
        return n;
    }

    // Bin-wise sum; both sides must have been produced with the same options.
    void merge(const DistanceComparison& other) {
        if (other.rho != rho || other.min_abs != min_abs || other.max_abs != max_abs)
            throw std::invalid_argument("distance comparison merge: options differ");
        if (!other.origin_in_kernel) return;
        origin_in_kernel = true;
        environments += other.environments;
        for (std::size_t i = 0; i < bins.size(); ++i) {
            bins[i].pairs += other.bins[i].pairs;
            bins[i].violations += other.bins[i].violations;
            bins[i].unreachable += other.bins[i].unreachable;
            bins[i].min_ratio = std::min(bins[i].min_ratio, other.bins[i].min_ratio);
            bins[i].sum_ratio += other.bins[i].sum_ratio;
        }
    }
};

// One environment's comparison. When the origin site is outside the kernel the
// result is returned with origin_in_kernel = false and empty bins; callers
// aggregating over environments skip it via merge.
inline DistanceComparison distance_comparison(const InducedKernel& K,
                                              const DistanceComparisonOptions& opts = {}) {
    if (!(opts.rho > 0.0))
        throw std::invalid_argument("distance comparison: rho must be positive");
    if (opts.min_abs < 1)
        throw std::invalid_argument("distance comparison: min_abs must be at least 1");
    const int half_box = K.side / 4;
    const int max_abs = opts.max_abs > 0 ? opts.max_abs : half_box;
    if (K.boundary == Boundary::periodic && max_abs > K.side / 2)
        throw std::invalid_argument(
            "distance comparison: max_abs exceeds half the torus side");
    if (max_abs < opts.min_abs)
        throw std::invalid_argument("distance comparison: max_abs is below min_abs (side " +
                                    std::to_string(K.side) + " leaves no annulus)");

    DistanceComparison out;
    out.rho = opts.rho;
    out.min_abs = opts.min_abs;
    out.max_abs = max_abs;
    out.bins.resize(static_cast<std::size_t>(max_abs - opts.min_abs + 1));
    for (int a = opts.min_abs; a <= max_abs; ++a)
        out.bins[static_cast<std::size_t>(a - opts.min_abs)].abs_x = a;

    BoxLattice lat(K.dim, K.side, K.boundary);
    std::vector<int> zero(static_cast<std::size_t>(K.dim), 0);
    const std::int32_t origin = lat.coords_site(zero.data());
    if (K.site_index[static_cast<std::size_t>(origin)] < 0) return out;
    out.origin_in_kernel = true;
    out.environments = 1;

    std::vector<std::int32_t> dist = markov_distances_from(K, origin);
    std::vector<int> delta(static_cast<std::size_t>(K.dim), 0);
    for (std::size_t r = 0; r < K.sites.size(); ++r) {
        const std::int32_t y = K.sites[r];
        if (y == origin) continue;
        lat.displacement(origin, y, delta.data());
        int a = 0;
        for (int i = 0; i < K.dim; ++i) a = std::max(a, std::abs(delta[static_cast<std::size_t>(i)]));
        if (a < opts.min_abs || a > max_abs) continue;
        DistanceBin& bin = out.bins[static_cast<std::size_t>(a - opts.min_abs)];
        bin.pairs += 1;
        const std::int32_t d = dist[r];
        if (d < 0) {
            bin.unreachable += 1;
            continue;
        }
        const double ratio = static_cast<double>(d) / static_cast<double>(a);
        bin.min_ratio = std::min(bin.min_ratio, ratio);
        bin.sum_ratio += ratio;
        if (static_cast<double>(d) <= opts.rho * static_cast<double>(a)) bin.violations += 1;
    }
    return out;
}

} // namespace rcm
