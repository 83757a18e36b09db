#pragma once

#include <cstdint>

namespace rde {

// Deterministic stream RNG (PCG-XSH-RR 64/32). A given (seed, stream) pair
// always produces the same draw sequence; distinct stream ids give
// statistically independent sequences for the same seed.
class Rng {
public:
    Rng() : Rng(0, 0) {}

    Rng(std::uint64_t seed, std::uint64_t stream) { reseed(seed, stream); }

    void reseed(std::uint64_t seed, std::uint64_t stream) {
        state_ = 0u;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        const std::uint64_t old = state_;
        state_ = old * 6364136223846793005ull + inc_;
        const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        const auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    // Uniform in [0, 1).
    double uniform() { return next_u32() * 0x1.0p-32; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased uniform integer in [0, n), n >= 1.
    std::uint32_t uniform_int(std::uint32_t n) {
        const std::uint32_t threshold = (-n) % n;
        for (;;) {
            const std::uint32_t r = next_u32();
            if (r >= threshold) return r % n;
        }
    }

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 1;
};

}  // namespace rde
