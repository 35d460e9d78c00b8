#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dac/rng.hpp"

namespace dac {

/// Fixed-length bitstring; the length is the problem size n and never changes
/// over an episode.
using BitString = std::vector<std::uint8_t>;

/// OneMax fitness: number of one-bits (target all-ones without loss of generality).
inline int one_max(const BitString& x) {
    int count = 0;
    for (std::uint8_t b : x) count += b;
    return count;
}

inline BitString random_bitstring(int n, Rng& rng) {
    BitString x(static_cast<std::size_t>(n));
    for (auto& b : x) b = static_cast<std::uint8_t>(rng.next_u64() & 1u);
    return x;
}

inline int hamming_distance(const BitString& a, const BitString& b) {
    if (a.size() != b.size()) throw std::logic_error("hamming_distance: length mismatch");
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

/// Copy of x with exactly l distinct uniformly chosen positions flipped.
inline BitString flip_bits(const BitString& x, int l, Rng& rng) {
    const int n = static_cast<int>(x.size());
    if (l < 1 || l > n) throw std::logic_error("flip_bits: l out of [1, n]");
    BitString y = x;
    // Partial Fisher-Yates over an index array picks l distinct positions.
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < l; ++i) {
        const int j = i + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[i], idx[j]);
        y[idx[i]] ^= 1u;
    }
    return y;
}

/// Biased uniform crossover: each bit taken from xp with probability c, else from x.
inline BitString crossover(const BitString& x, const BitString& xp, double c, Rng& rng) {
    if (x.size() != xp.size()) throw std::logic_error("crossover: length mismatch");
    if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("crossover: c out of (0, 1]");
    BitString y = x;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (rng.bernoulli(c)) y[i] = xp[i];
    return y;
}

} // namespace dac
