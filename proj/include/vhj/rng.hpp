#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace vhj::rng {

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, index). Environments use this so that a sample at a given
// position never depends on the window it was requested in.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::int64_t index) noexcept {
    std::uint64_t h = splitmix64(seed ^ 0x6A09E667F3BCC909ULL);
    h = splitmix64(h ^ (stream * 0xD1B54A32D192ED03ULL));
    return splitmix64(h ^ static_cast<std::uint64_t>(index));
}

// Uniform on the open interval (0,1).
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::int64_t index) noexcept {
    const std::uint64_t bits = mix(seed, stream, index) >> 11;  // 53 bits
    return (static_cast<double>(bits) + 0.5) * (1.0 / 9007199254740992.0);
}

// Standard normal via Box-Muller on two independent counters.
inline double normal(std::uint64_t seed, std::uint64_t stream, std::int64_t index) noexcept {
    const double u1 = uniform(seed, stream, 2 * index);
    const double u2 = uniform(seed, stream, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Derive an independent seed for a sub-model (e.g. the diffusion coefficient).
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) noexcept {
    return splitmix64(seed ^ splitmix64(tag + 0x243F6A8885A308D3ULL));
}

}  // namespace vhj::rng
