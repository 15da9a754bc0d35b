/**
 * @file rng.hpp
 * @brief Counter-based random numbers: every draw is a pure function of
 * (seed, stream, counter, slot), so the order in which threads consume them
 * cannot change the results.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mkv {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
    std::uint64_t h = splitmix64(seed ^ 0x6A09E667F3BCC909ull);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ (b * 0xD1B54A32D192ED03ull));
    h = splitmix64(h ^ (c * 0x8CB92BA72F3D8DD7ull));
    return h;
}

// Uniform on the open interval (0, 1).
inline double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
    const std::uint64_t h = hash_key(seed, a, b, c);
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal via Box-Muller (cosine branch).
inline double counter_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
    const double u1 = counter_uniform(seed, a, b, 2 * c);
    const double u2 = counter_uniform(seed, a, b, 2 * c + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Seed of a derived experiment stream (replication r of a run seeded `seed`).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
    return splitmix64(seed ^ splitmix64(tag + 0x243F6A8885A308D3ull));
}

// Brownian increments keyed by (particle, step, component).
class BrownianDriver {
public:
    explicit BrownianDriver(std::uint64_t seed) : seed_(seed) {}
    std::uint64_t seed() const noexcept { return seed_; }
    double normal(std::uint64_t particle, std::uint64_t step, std::uint64_t component) const noexcept {
        return counter_normal(seed_, particle, step, component);
    }

private:
    std::uint64_t seed_;
};

}  // namespace mkv
