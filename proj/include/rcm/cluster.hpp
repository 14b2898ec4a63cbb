// Percolation structure of a conductance field: threshold labeling,
// the finite stand-ins for the infinite cluster and the strong cluster,
// the weak holes between them, and graph distances on the strong cluster.
//
// Threshold convention: label_clusters(f, 0.0) joins sites across edges with
// omega > 0 (the "positive" graph); any threshold t > 0 joins across
// omega >= t. The infinite-cluster stand-in is the largest component, ties
// broken by the lowest contained site index so the choice is deterministic.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

#include "rcm/field.hpp"

namespace rcm {

struct ClusterLabeling {
    double threshold = 0.0;
    // Per site: component id, or -1 for sites with no incident qualifying edge.
    std::vector<std::int32_t> component;
    std::vector<std::int64_t> component_size;
    std::int32_t largest = -1;
    std::int64_t n_labeled = 0;

    bool in_largest(std::int32_t s) const { return largest >= 0 && component[s] == largest; }
    std::int64_t largest_size() const { return largest >= 0 ? component_size[largest] : 0; }
};

namespace detail {

struct UnionFind {
    std::vector<std::int32_t> parent;
    explicit UnionFind(std::int64_t n) : parent(static_cast<std::size_t>(n)) {
        for (std::int64_t i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] =
            static_cast<std::int32_t>(i);
    }
    std::int32_t find(std::int32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        // Attach the larger root index under the smaller one; roots then are
        // the minimal site of their component, which keeps ids deterministic.
        if (a < b) parent[b] = a;
        else parent[a] = b;
    }
};

} // namespace detail

inline bool edge_qualifies(double omega, double threshold) {
    return threshold > 0.0 ? omega >= threshold : omega > 0.0;
}

inline ClusterLabeling label_clusters(const ConductanceField& f, double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw std::invalid_argument("label_clusters: threshold must lie in [0,1]");
    const BoxLattice& lat = f.lattice();
    const std::int64_t n = lat.n_sites();
    detail::UnionFind uf(n);
    std::vector<std::uint8_t> touched(static_cast<std::size_t>(n), 0);
    for (std::int64_t e = 0; e < lat.n_edges(); ++e) {
        if (!edge_qualifies(f.omega_at(e), threshold)) continue;
        Edge ed = lat.edge(e);
        uf.unite(ed.u, ed.v);
        touched[ed.u] = 1;
        touched[ed.v] = 1;
    }
    ClusterLabeling lab;
    lab.threshold = threshold;
    lab.component.assign(static_cast<std::size_t>(n), -1);
    // Component ids in order of first (= minimal) site, sizes alongside.
    std::vector<std::int32_t> root_id(static_cast<std::size_t>(n), -1);
    for (std::int32_t s = 0; s < n; ++s) {
        if (!touched[s]) continue;
        std::int32_t r = uf.find(s);
        if (root_id[r] < 0) {
            root_id[r] = static_cast<std::int32_t>(lab.component_size.size());
            lab.component_size.push_back(0);
        }
        lab.component[s] = root_id[r];
        lab.component_size[static_cast<std::size_t>(root_id[r])] += 1;
        lab.n_labeled += 1;
    }
    // Largest component; ties fall to the lower id, i.e. the lower minimal site.
    std::int64_t best = 0;
    for (std::size_t c = 0; c < lab.component_size.size(); ++c) {
        if (lab.component_size[c] > best) {
            best = lab.component_size[c];
            lab.largest = static_cast<std::int32_t>(c);
        }
    }
    return lab;
}

// A weak hole: one connected piece (via omega > 0 edges) of the set
// "largest positive cluster minus largest strong cluster", together with its
// strong-cluster boundary and its minimal-image l-inf diameter.
struct HoleComponent {
    std::vector<std::int32_t> sites;     // ascending
    std::vector<std::int32_t> boundary;  // strong-cluster sites adjacent via omega > 0
    int linf_diameter = 0;
};

namespace detail {

// Longest minimal-image extent of a coordinate multiset on the circle of
// circumference L: complement of the largest cyclic gap. Valid as the
// pairwise maximum while the set spans less than half the circle, which
// holds for every hole this project can absorb.
inline int circular_extent(std::vector<int>& coords, int L, bool periodic) {
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    if (coords.size() <= 1) return 0;
    if (!periodic) return coords.back() - coords.front();
    int max_gap = coords.front() + L - coords.back();
    for (std::size_t i = 1; i < coords.size(); ++i)
        max_gap = std::max(max_gap, coords[i] - coords[i - 1]);
    return L - max_gap;
}

} // namespace detail

inline std::vector<HoleComponent> hole_components(const ConductanceField& f,
                                                  const ClusterLabeling& positive,
                                                  const ClusterLabeling& strong) {
    const BoxLattice& lat = f.lattice();
    const std::int64_t n = lat.n_sites();
    const int slots = f.slots();
    std::vector<std::int32_t> hole_id(static_cast<std::size_t>(n), -1);
    std::vector<HoleComponent> holes;
    std::vector<std::int32_t> stack;
    const bool periodic = lat.boundary() == Boundary::periodic;
    for (std::int32_t s0 = 0; s0 < n; ++s0) {
        if (!positive.in_largest(s0) || strong.in_largest(s0) || hole_id[s0] >= 0) continue;
        auto id = static_cast<std::int32_t>(holes.size());
        holes.emplace_back();
        HoleComponent& h = holes.back();
        hole_id[s0] = id;
        stack.assign(1, s0);
        while (!stack.empty()) {
            std::int32_t s = stack.back();
            stack.pop_back();
            h.sites.push_back(s);
            for (int q = 0; q < slots; ++q) {
                if (f.weight_at(s, q) <= 0.0) continue;
                std::int32_t v = f.neighbor_at(s, q);
                if (strong.in_largest(v)) {
                    h.boundary.push_back(v);
                } else if (hole_id[v] < 0) {
                    // v shares a positive edge with a largest-cluster site, so
                    // it is in that cluster and outside the strong one: hole.
                    hole_id[v] = id;
                    stack.push_back(v);
                }
            }
        }
        std::sort(h.sites.begin(), h.sites.end());
        std::sort(h.boundary.begin(), h.boundary.end());
        h.boundary.erase(std::unique(h.boundary.begin(), h.boundary.end()), h.boundary.end());
        std::vector<int> coords;
        for (int k = 0; k < lat.dim(); ++k) {
            coords.clear();
            for (std::int32_t s : h.sites) coords.push_back(lat.coord(s, k));
            h.linf_diameter = std::max(
                h.linf_diameter, detail::circular_extent(coords, lat.side(), periodic));
        }
    }
    return holes;
}

// Map site -> index into the hole list (-1 if the site is in no hole).
inline std::vector<std::int32_t> hole_index_by_site(const BoxLattice& lat,
                                                    const std::vector<HoleComponent>& holes) {
    std::vector<std::int32_t> idx(static_cast<std::size_t>(lat.n_sites()), -1);
    for (std::size_t h = 0; h < holes.size(); ++h)
        for (std::int32_t s : holes[h].sites) idx[s] = static_cast<std::int32_t>(h);
    return idx;
}

/// Empirical tail of the hole diameter seen from an anchor site: row n holds
// the count of trials whose anchor sits in a hole of l-inf diameter >= n,
// so tail(n) = count(n) / trials. The accumulator feeds it two ways: pooled
// (every site of every environment is a trial; translation invariance is
// what makes pooling legitimate) or anchored (one trial per environment at
// a fixed site).
struct DiameterTail {
    std::vector<std::int64_t> count; // index n = 0,1,...
    std::int64_t trials = 0;

    double tail(std::size_t n) const {
        return trials > 0 && n < count.size()
                   ? static_cast<double>(count[n]) / static_cast<double>(trials)
                   : 0.0;
    }
};

struct DiameterTailAccumulator {
    DiameterTail t;

    void add_environment(const BoxLattice& lat, const std::vector<HoleComponent>& holes) {
        t.trials += lat.n_sites();
        for (const HoleComponent& h : holes) {
            std::size_t d = static_cast<std::size_t>(h.linf_diameter);
            if (t.count.size() < d + 1) t.count.resize(d + 1, 0);
            // Every site of the hole is an anchor seeing diameter >= n for
            // all n up to the hole diameter.
            for (std::size_t n = 0; n <= d; ++n)
                t.count[n] += static_cast<std::int64_t>(h.sites.size());
        }
    }

    // One trial per environment, looking only at the hole (if any) holding
    // the anchor site.
    void add_environment_anchored(std::int32_t anchor,
                                  const std::vector<HoleComponent>& holes) {
        t.trials += 1;
        for (const HoleComponent& h : holes) {
            if (std::find(h.sites.begin(), h.sites.end(), anchor) == h.sites.end())
                continue;
            std::size_t d = static_cast<std::size_t>(h.linf_diameter);
            if (t.count.size() < d + 1) t.count.resize(d + 1, 0);
            for (std::size_t n = 0; n <= d; ++n) ++t.count[n];
            break;
        }
    }
};

// BFS hop count between two sites of the largest strong cluster; nullopt when
// either endpoint is outside it (unreachable is a value here, not an error).
inline std::optional<std::int64_t> chemical_distance(const ConductanceField& f,
                                                     const ClusterLabeling& strong,
                                                     std::int32_t x, std::int32_t y) {
    if (!strong.in_largest(x) || !strong.in_largest(y)) return std::nullopt;
    if (x == y) return 0;
    const BoxLattice& lat = f.lattice();
    const int slots = f.slots();
    std::vector<std::int32_t> dist(static_cast<std::size_t>(lat.n_sites()), -1);
    std::queue<std::int32_t> q;
    dist[x] = 0;
    q.push(x);
    while (!q.empty()) {
        std::int32_t s = q.front();
        q.pop();
        for (int qq = 0; qq < slots; ++qq) {
            if (!edge_qualifies(f.weight_at(s, qq), strong.threshold)) continue;
            std::int32_t v = f.neighbor_at(s, qq);
            if (v < 0 || dist[v] >= 0 || !strong.in_largest(v)) continue;
            dist[v] = dist[s] + 1;
            if (v == y) return dist[v];
            q.push(v);
        }
    }
    return std::nullopt;
}

// Single-source variant over the whole strong cluster (-1 = unreachable).
inline std::vector<std::int32_t> chemical_distances(const ConductanceField& f,
                                                    const ClusterLabeling& strong,
                                                    std::int32_t x) {
    const BoxLattice& lat = f.lattice();
    const int slots = f.slots();
    std::vector<std::int32_t> dist(static_cast<std::size_t>(lat.n_sites()), -1);
    if (!strong.in_largest(x)) return dist;
    std::queue<std::int32_t> q;
    dist[x] = 0;
    q.push(x);
    while (!q.empty()) {
        std::int32_t s = q.front();
        q.pop();
        for (int qq = 0; qq < slots; ++qq) {
            if (!edge_qualifies(f.weight_at(s, qq), strong.threshold)) continue;
            std::int32_t v = f.neighbor_at(s, qq);
            if (v < 0 || dist[v] >= 0 || !strong.in_largest(v)) continue;
            dist[v] = dist[s] + 1;
            q.push(v);
        }
    }
    return dist;
}

} // namespace rcm
