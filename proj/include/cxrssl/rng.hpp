#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace cxrssl {

/// All randomness in the toolkit flows from explicitly seeded 64-bit Mersenne twisters.
/// Distributions are implemented here rather than through <random> so that the draws
/// are identical across standard libraries.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed for a stream identified by (seed, a, b, c), e.g. (global seed, epoch, image, view).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) noexcept {
    return mix64(mix64(mix64(mix64(seed) ^ a) ^ b) ^ c);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi].
inline double uniform(Rng& rng, double lo, double hi) {
    if (lo == hi) {
        return lo;
    }
    const double v = lo + (hi - lo) * uniform01(rng);
    return v > hi ? hi : v;
}

/// Uniform integer in [lo, hi] (inclusive).
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1u;
    if (span == 0u) {
        return static_cast<std::int64_t>(rng());
    }
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r = rng();
    while (r >= limit) {
        r = rng();
    }
    return lo + static_cast<std::int64_t>(r % span);
}

inline bool bernoulli(Rng& rng, double p) {
    return uniform01(rng) < p;
}

/// Fisher-Yates shuffle with the portable integer draw.
template <typename T>
void shuffle(std::span<T> values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace cxrssl
