#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace warpgrid {

// Deterministic RNG. Draws are derived from raw mt19937 words rather than
// std:: distributions, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(static_cast<std::mt19937::result_type>(mix(seed))) {}

    // Stable seed derivation for substreams (per pair, per purpose, ...).
    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    static uint64_t derive(uint64_t seed, uint64_t stream) { return mix(seed * 0x100000001b3ull + stream); }

    uint32_t next_u32() { return gen_(); }

    // Uniform in [0,1) with 24 bits of mantissa.
    float uniform() { return static_cast<float>(gen_() >> 8) * 0x1.0p-24f; }

    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    int uniform_int(int n) { return static_cast<int>(uniform() * static_cast<float>(n)); }

    // Standard normal via Box-Muller.
    float normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        float u1 = uniform(), u2 = uniform();
        if (u1 < 1e-12f) u1 = 1e-12f;
        const float r = std::sqrt(-2.0f * std::log(u1));
        const float a = 6.28318530717958647692f * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937 gen_;
    bool have_spare_ = false;
    float spare_ = 0.0f;
};

}  // namespace warpgrid
