// PCG32 generator. One explicitly seeded stream per run drives every stochastic
// choice (init, dropout masks, shuffling), which keeps runs reproducible.
#pragma once

#include <cstdint>
#include <vector>

namespace normshare {

class Pcg32 {
public:
    explicit Pcg32(uint64_t seed, uint64_t stream = 0x14057b7ef767814full) { reseed(seed, stream); }

    void reseed(uint64_t seed, uint64_t stream = 0x14057b7ef767814full) {
        state_ = 0u;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    uint32_t next_u32() {
        const uint64_t old = state_;
        state_ = old * 6364136223846793005ull + inc_;
        const uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        const uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    uint64_t next_u64() {
        const uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // 53-bit uniform in [0, 1).
    double next_double() {
        const uint64_t a = next_u32() >> 5;   // 27 bits
        const uint64_t b = next_u32() >> 6;   // 26 bits
        return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) / 9007199254740992.0;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Unbiased integer in [0, n).
    uint32_t below(uint32_t n) {
        if (n <= 1) return 0;
        const uint32_t threshold = (-n) % n;
        for (;;) {
            const uint32_t r = next_u32();
            if (r >= threshold) return r % n;
        }
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = below(static_cast<uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_ = 0;
    uint64_t inc_ = 0;
};

// Derives an independent, reproducible stream for a named sub-run (e.g. one sweep
// cell); splitmix-style so cell ids far apart cannot collide in practice.
inline uint64_t derive_seed(uint64_t base, uint64_t salt) {
    uint64_t z = base + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace normshare
