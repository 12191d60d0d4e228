#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

namespace hwf {

// Deterministic, platform-independent random stream.
//
// The engine is std::mt19937_64 (its output sequence is fully specified by
// the standard) and all distributions are derived here from raw 64-bit
// draws, so two builds with the same seed produce bitwise identical values.
// Streams are split by hashing the root seed with a list of substream keys,
// e.g. (epoch, image, patch), which makes every noise field and crop
// independent of iteration order.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : root_(seed), engine_(mix(seed ^ kPhi)) {}

    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Derived stream for a substream key path, e.g. {epoch, image, patch}.
    RngStream split(std::initializer_list<uint64_t> keys) const {
        uint64_t h = root_;
        for (uint64_t k : keys) h = mix(h ^ mix(k));
        return RngStream(h);
    }

    uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Uses rejection to stay unbiased.
    uint64_t next_below(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    // Standard normal via Box-Muller (the second value is dropped so draws
    // stay independent of call grouping).
    double next_gaussian() {
        double u1;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

private:
    static constexpr uint64_t kPhi = 0x9e3779b97f4a7c15ULL;
    static constexpr double kPi = 3.14159265358979323846;

    uint64_t root_ = 0;
    std::mt19937_64 engine_;
};

// 64-bit FNV-1a, used for name-based deterministic splits.
inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace hwf
