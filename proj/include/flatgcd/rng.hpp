#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace flatgcd {

// Deterministic, platform-independent pseudo-random generator.
//
// Algorithm: xoshiro256** (Blackman & Vigna), state initialized from the
// 64-bit seed through splitmix64. Every draw is a pure function of the seed
// and the call sequence, so seeded runs reproduce bit-identically across
// compilers and platforms. Derived distributions are fixed too: doubles use
// the top 53 bits, normals use basic Box-Muller (two uniforms per sample),
// bounded ints use rejection-free modulo of a 64-bit draw (bias is
// irrelevant at the range sizes used here, and determinism is what matters).
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : state_) {
            // splitmix64 step
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; consumes exactly two uniforms.
    double normal() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53; // log(0) guard
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // +1 or -1 with equal probability.
    double rademacher() { return (next_u64() & 1u) ? 1.0 : -1.0; }

    // Fisher-Yates shuffle, back to front.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child generator; the stream index keeps children disjoint.
    Rng split(uint64_t stream) { return Rng(next_u64() ^ (0x9e3779b97f4a7c15ULL * (stream + 1))); }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4];
};

} // namespace flatgcd
