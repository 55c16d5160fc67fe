#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace tailforge {

// Seed mixing (splitmix64). Used to derive independent substreams from one seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(mix64(seed ^ 0x6a09e667f3bcc909ULL) + mix64(a) + (b * 0x9e3779b97f4a7c15ULL));
}

// PCG32. The standard library engines are portable but its distributions are
// implementation-defined, so every draw here is built from raw bits to keep
// generated data bit-identical across platforms and compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        state_ = 0;
        inc_ = (stream << 1) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18) ^ old) >> 27);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, bound). bound = 0 is a caller bug; returns 0.
    std::uint32_t uniform_int(std::uint32_t bound) {
        if (bound <= 1) return 0;
        std::uint32_t threshold = (-bound) % bound;
        for (;;) {
            std::uint32_t r = next_u32();
            if (r >= threshold) return r % bound;
        }
    }

    // Irwin-Hall 12-sum approximation of N(0,1). Pure additions, so the stream
    // stays bit-exact across libm implementations; tails are clipped at +-6,
    // which is irrelevant for weight init, pixel noise, and jitter.
    double normal() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += uniform();
        return s - 6.0;
    }

    // Beta(alpha, alpha) via Johnk's rejection. alpha = 1 degenerates to uniform.
    double beta_symmetric(double alpha) {
        if (alpha == 1.0) return uniform();
        double e = 1.0 / alpha;
        for (;;) {
            double x = std::pow(uniform(), e);
            double y = std::pow(uniform(), e);
            if (x + y > 0.0 && x + y <= 1.0) return x / (x + y);
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_int(static_cast<std::uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

}  // namespace tailforge
