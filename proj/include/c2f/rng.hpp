#pragma once

#include <cmath>
#include <cstdint>

namespace c2f {

/// Deterministic 64-bit generator: xoshiro256++ seeded through splitmix64
/// (Blackman & Vigna's reference constants). The integer and uniform streams
/// are bit-exact across platforms; normal draws go through libm and are
/// exact on a fixed platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
        has_spare_ = false;
        spare_ = 0.0;
    }

    /// Derives an independent stream for a named purpose (dataset, init, ...).
    Rng fork(std::uint64_t stream_id) const {
        std::uint64_t base = seed_ ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1));
        return Rng(base);
    }

    std::uint64_t seed() const { return seed_; }

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

    /// Uniform double in [0, 1), 53 mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller, second value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Normal clipped to +-2 standard deviations by rejection.
    double truncated_normal(double stddev) {
        for (;;) {
            const double z = normal();
            if (z >= -2.0 && z <= 2.0) return z * stddev;
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& s) {
        std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t state_[4];
    bool has_spare_;
    double spare_;
};

}  // namespace c2f
