// Deterministic randomness for fields and walks.
//
// Field sampling uses a counter-based generator: every edge draws its
// uniforms from a stateless mix of (seed, edge index, stream). The result
// does not depend on the order edges are visited, so parallel sampling,
// re-sampling a sub-box, and shift identities all come out bit-exact.
//
// Walk sampling uses mt19937_64 seeded through the same mixer, one engine
// per (seed, walk index), so ensembles are reproducible under any
// scheduling of the walks.

#pragma once

#include <cstdint>
#include <random>

namespace rcm {

// splitmix64 finalizer; the standard 64-bit avalanche mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Stateless counter RNG: one u64 word keyed by (seed, counter, stream).
inline std::uint64_t counter_word(std::uint64_t seed, std::uint64_t counter,
                                  std::uint64_t stream = 0) {
    return mix64(mix64(seed ^ mix64(counter)) ^ mix64(stream + 0x517cc1b727220a95ull));
}

// Uniform in [0,1): 53 random bits.
inline double to_unit_half_open(std::uint64_t w) {
    return static_cast<double>(w >> 11) * 0x1.0p-53;
}

// Uniform in (0,1]: complement of the above.
inline double to_unit_left_open(std::uint64_t w) {
    return 1.0 - to_unit_half_open(w);
}

// Uniform in (0,1): both endpoints excluded, used where log() or 1/x follows.
inline double to_unit_open(std::uint64_t w) {
    return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
}

// Per-walk engine. mt19937_64 wants more entropy than one word; feed it a
// short mixed sequence.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<unsigned>(counter_word(seed, index, 1)),
                      static_cast<unsigned>(counter_word(seed, index, 1) >> 32),
                      static_cast<unsigned>(counter_word(seed, index, 2)),
                      static_cast<unsigned>(counter_word(seed, index, 2) >> 32)};
    return std::mt19937_64(seq);
}

} // namespace rcm
