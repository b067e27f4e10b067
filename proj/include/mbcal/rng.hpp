#pragma once

#include <cstdint>

namespace mbcal {

/// splitmix64 step: tiny, seedable, and reproducible across platforms.
/// Deterministic per-item streams are built by mixing a base seed with
/// the item index before stepping.
inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Uniform double in [0, 1).
inline double splitmix_unit(uint64_t& state) {
    return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

}  // namespace mbcal
