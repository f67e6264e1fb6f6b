// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cdlab {

/// Counter-based pseudo-random generator (splitmix64 finalizer over a
/// seed+counter pair). The entire stream position is the single `cursor`
/// value, so checkpoints can capture and restore it exactly, and any
/// position can be seeked in O(1).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t cursor = 0) noexcept
        : seed_(seed), counter_(cursor) {}

    std::uint64_t next_u64() noexcept {
        std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller. Consumes exactly two counter values;
    /// the sine partner is discarded so the stream position stays a pure
    /// function of how many variates were drawn.
    double next_normal() noexcept {
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Integer in [0, bound) by rejection-free multiply-shift (bound > 0).
    std::uint64_t next_below(std::uint64_t bound) noexcept {
        // 128-bit multiply-high keeps the map unbiased enough for sampling
        // batch indices; bound is tiny relative to 2^64 in all our uses.
        const unsigned __int128 m =
            static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(bound);
        return static_cast<std::uint64_t>(m >> 64);
    }

    std::uint64_t cursor() const noexcept { return counter_; }
    void seek(std::uint64_t cursor) noexcept { counter_ = cursor; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

/// Stateless mix of a base seed and an index, used to derive per-run seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    std::uint64_t z = base ^ (0xD1342543DE82EF95ull + index * 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace cdlab
