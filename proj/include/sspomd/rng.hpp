#pragma once

#include <cstdint>
#include <cmath>

#include "sspomd/errors.hpp"

namespace sspomd {

// Counter-based generator (splitmix64 in counter mode). The n-th output is a
// pure function of (seed, n), so streams can be replayed or accessed at random
// and are bit-identical across platforms. This is what makes cost streams and
// Monte Carlo runs reproducible from a recorded 64-bit seed alone.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Output at an explicit (seed, counter) pair without advancing any state.
    static std::uint64_t at(std::uint64_t seed, std::uint64_t counter) {
        return mix(mix(seed) + counter * 0x9E3779B97F4A7C15ULL);
    }

    // Two-level keyed access, used by per-episode cost samplers: (seed, k, i).
    static std::uint64_t at(std::uint64_t seed, std::uint64_t k, std::uint64_t i) {
        return mix(at(seed, k) + i * 0xD1B54A32D192ED03ULL);
    }

    static double to_unit(std::uint64_t bits) {
        // 53 random bits into [0, 1).
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    static double to_unit_open(std::uint64_t bits) {
        // (0, 1): safe as a log() argument.
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t next_u64() { return at(seed_, counter_++); }
    double next_double() { return to_unit(next_u64()); }
    double next_double_open() { return to_unit_open(next_u64()); }

    bool bernoulli(double p) { return next_double() < p; }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(next_double() * static_cast<double>(n)) % n;
    }

    // Binomial(n, p) by skip-sampling runs of successes with geometric jumps;
    // exact and O(n(1-p)) expected time, which suits the p >= 1/2 regime of the
    // random-walk estimator.
    std::int64_t binomial(std::int64_t n, double p) {
        if (p < 0.0 || p > 1.0 || n < 0) throw BadParam("binomial: need n >= 0, p in [0,1]");
        if (p == 0.0 || n == 0) return 0;
        if (p == 1.0) return n;
        if (p < 0.5) return n - binomial(n, 1.0 - p);
        const double inv_log_p = 1.0 / std::log(p);
        std::int64_t successes = 0;
        std::int64_t left = n;
        while (left > 0) {
            // Number of successes before the next failure: floor(log U / log p).
            const double g = std::floor(std::log(next_double_open()) * inv_log_p);
            if (g >= static_cast<double>(left)) {
                successes += left;
                break;
            }
            successes += static_cast<std::int64_t>(g);
            left -= static_cast<std::int64_t>(g) + 1;
        }
        return successes;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

} // namespace sspomd
