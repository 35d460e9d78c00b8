#pragma once

#include <cstdint>
#include <stdexcept>
#include <string_view>

namespace dac {

// SplitMix64 (Steele, Lea & Flood 2014): a 64-bit counter advanced by the
// golden-ratio increment, finalized with the mix13 avalanche. Counter-based,
// so any output can be reproduced from the seed alone on every platform.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        return mix(state);
    }
};

// xoshiro256++ 1.0 (Blackman & Vigna 2019), state filled from SplitMix64 as
// the authors recommend. Pure integer arithmetic: identical streams on any
// conforming platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& word : state_) word = sm.next();
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random mantissa bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound), unbiased via rejection.
    std::uint64_t uniform_below(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

namespace detail {
inline constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}
} // namespace detail

// Deterministic seed derivation for independent streams. The tag is hashed
// with FNV-1a and folded together with the master seed and repetition index
// through the SplitMix64 finalizer; distinct (master, repetition, tag)
// triples land on effectively disjoint streams.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t repetition,
                                 std::string_view purpose_tag) {
    std::uint64_t x = SplitMix64::mix(master_seed ^ detail::fnv1a64(purpose_tag));
    x = SplitMix64::mix(x + (repetition + 1) * 0x9E3779B97F4A7C15ULL);
    return SplitMix64::mix(x ^ 0xA5A5A5A55A5A5A5AULL);
}

} // namespace dac
