#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace dthcp {

/// SplitMix64 generator. Every random quantity in the project is derived from
/// this stream through the helpers below, so scenes are reproducible bit for bit
/// on any platform (the std distributions are implementation-defined).
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    static constexpr const char* kAlgorithm = "splitmix64";

    explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive). Uses the multiply-shift reduction
    /// so the result depends only on the raw 64-bit draw.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<unsigned __int128>(hi - lo + 1);
        const auto draw = static_cast<unsigned __int128>((*this)());
        return lo + static_cast<std::int64_t>((draw * span) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (one value per call, second discarded).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

/// Mixes a value into a seed; used to derive independent sub-streams
/// (per scene, per box) from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value) {
    SplitMix64 g(seed ^ (value * 0xD1B54A32D192ED03ULL));
    return g();
}

}  // namespace dthcp
