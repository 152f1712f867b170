#pragma once

#include <cstdint>
#include <random>

namespace brickdesign {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to decorrelate derived seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Stream-split rule: the seed of stream `index` under `master` is
/// splitmix64(splitmix64(master) ^ splitmix64(index + 1)). Streams with
/// distinct indices are statistically independent for all practical
/// purposes and the mapping is stable across platforms.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 1));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(master, a), b);
}

inline Rng make_stream(std::uint64_t master, std::uint64_t index) {
    return Rng(derive_seed(master, index));
}

}  // namespace brickdesign
