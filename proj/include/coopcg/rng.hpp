// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

namespace coopcg::rng {

// SplitMix64: a counter-based 64-bit generator.  Every draw is a pure
// function of (key, counter), so streams can be split freely and a change
// in how many values one consumer draws never perturbs another stream.

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Purpose tags for derived streams.  Generators for one artifact (matrix,
/// right-hand side, starting block, ...) each get their own stream so they
/// stay independent of each other's consumption.
enum class StreamId : std::uint64_t {
    orthogonal = 1,
    spectrum = 2,
    rhs = 3,
    starts = 4,
    spd_probe = 5,
    integer_entries = 6,
    trial = 7,
};

class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return mix64(key_ + (++ctr_) * kGolden); }

    /// Uniform on [0, 1) with 53 random bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    /// Uniform integer on [lo, hi], rejection sampled (no modulo bias).
    std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % span;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return lo + static_cast<std::int64_t>(v % span);
    }

    /// Standard normal via Box-Muller; consumes exactly two draws.
    double next_normal() {
        double u1 = next_unit();
        double u2 = next_unit();
        if (u1 <= 0.0)
            u1 = 0x1.0p-53; // next_unit() can return 0; log needs (0,1]
        const double r = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586476925286766559;
        return r * std::cos(two_pi * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

/// Derive an independent stream from a user seed, a purpose tag and an
/// optional extra discriminator (trial index, dimension, ...).
inline Stream make_stream(std::uint64_t seed, StreamId id, std::uint64_t extra = 0) {
    std::uint64_t key = mix64(seed ^ mix64(static_cast<std::uint64_t>(id) ^ mix64(extra)));
    return Stream(key);
}

/// Key for deriving per-trial problem seeds in the benchmark harness.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(base ^ mix64(a ^ mix64(b)));
}

} // namespace coopcg::rng
