#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fedcd {

// SplitMix64 finalizer, used to derive independent stream seeds from a
// (global seed, stream id) pair. Every component that needs randomness gets
// its own stream so that parallel execution cannot change results.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic random source. Sampling is implemented here instead of using
// std::*_distribution, whose output is implementation-defined; mt19937_64
// itself is fully specified, so sequences are reproducible everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n), n >= 1, by rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t bound = n * (~0ULL / n);
        std::uint64_t x = next_u64();
        while (x >= bound) x = next_u64();
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, two uniforms per draw. No cached spare: interleaving calls
    // with other sampling must not change the stream.
    double normal(double mean = 0.0, double sd = 1.0) {
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586;
        return mean + sd * r * std::cos(two_pi * u2);
    }

    // Difference of two unit exponentials: Laplace(0, scale), finite always.
    double laplace(double scale) {
        const double e1 = -std::log1p(-uniform());
        const double e2 = -std::log1p(-uniform());
        return scale * (e1 - e2);
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Stream ids reserved by the pipeline. Client streams are kClientBase + school.
namespace streams {
inline constexpr std::uint64_t kServerInit = 0;
inline constexpr std::uint64_t kClientBase = 1;
inline constexpr std::uint64_t kDataGen = 1'000'003;
inline constexpr std::uint64_t kSplitBase = 2'000'003;
}  // namespace streams

}  // namespace fedcd
