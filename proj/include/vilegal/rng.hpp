#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace vilegal {

// Deterministic RNG helpers. std::mt19937_64 output is fully specified by the
// standard, but the std distributions and std::shuffle are not, so all
// sampling goes through these hand-rolled routines to keep artifacts
// byte-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, n). Rejection-free multiply-shift (Lemire) with the
    // widening done in __uint128_t; deterministic given the engine stream.
    std::uint64_t below(std::uint64_t n) {
        // n == 0 is a caller bug; return 0 rather than UB.
        if (n <= 1) return 0;
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double real(double lo, double hi) { return lo + (hi - lo) * real(); }

    // Standard normal via Box-Muller (no cached spare: keeps the stream
    // position a pure function of the number of calls).
    double normal() {
        double u1 = real();
        double u2 = real();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Fisher-Yates; std::shuffle is implementation-defined.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n), in sorted order.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

inline std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
    if (k > n) k = n;
    // Floyd's algorithm needs a set; with desk-scale n a partial Fisher-Yates
    // over an index vector is simpler and still O(n).
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace vilegal
