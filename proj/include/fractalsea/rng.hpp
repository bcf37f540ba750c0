#pragma once

// Counter-based random streams. Every draw is a pure function of a key tuple,
// so results do not depend on evaluation order or thread count.
//
// Key hashing: h0 = mix(seed ^ 0x9E3779B97F4A7C15), h_{i+1} = mix(h_i ^ key_i + i),
// where mix is the SplitMix64 finalizer.
// Uniform: top 53 bits of the hash, scaled to [0, 1).
// Normal: Box-Muller cosine branch, u1 = 1 - uniform(key..., 0), u2 = uniform(key..., 1),
//         z = sqrt(-2 ln u1) * cos(2 pi u2).

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace fractalsea::rng {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_key(std::uint64_t seed, std::initializer_list<std::uint64_t> key) noexcept {
    std::uint64_t h = mix64(seed ^ 0x9E3779B97F4A7C15ULL);
    std::uint64_t i = 0;
    for (std::uint64_t k : key) {
        h = mix64(h ^ (k + i));
        ++i;
    }
    return h;
}

constexpr double to_unit(std::uint64_t h) noexcept {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                      std::uint64_t d = 0, std::uint64_t lane = 0) noexcept {
    return to_unit(hash_key(seed, {a, b, c, d, lane}));
}

inline double normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                     std::uint64_t d = 0) noexcept {
    const double u1 = 1.0 - uniform(seed, a, b, c, d, 0);
    const double u2 = uniform(seed, a, b, c, d, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Signed integers are folded in two's complement.
constexpr std::uint64_t as_key(std::int64_t v) noexcept { return static_cast<std::uint64_t>(v); }

} // namespace fractalsea::rng
