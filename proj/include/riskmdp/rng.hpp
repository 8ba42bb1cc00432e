#pragma once

#include <cstdint>
#include <random>

namespace riskmdp {

// Deterministic draws on top of mt19937_64. std::uniform_*_distribution is
// implementation-defined, so results would not reproduce across standard
// libraries; these helpers keep seeded outputs stable everywhere.

inline double next_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53; // [0, 1)
}

inline std::size_t pick_index(std::mt19937_64& rng, std::size_t n) {
    std::size_t i = static_cast<std::size_t>(next_double(rng) * static_cast<double>(n));
    return i < n ? i : n - 1;
}

/// Stable seed derivation for per-run / per-purpose substreams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t salt = 0) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1) + 0x632be59bd9b4e019ull * salt;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace riskmdp
