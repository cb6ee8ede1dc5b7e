#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>

namespace tats {

/// Seeded generator with platform-independent draws. std::mt19937_64 output is
/// fixed by the standard; the distributions here are written out so results do
/// not depend on the standard library vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(mix(seed, stream)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n) by rejection, n > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        // splitmix64 finalizer over (seed, stream)
        std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + stream * 0xD1B54A32D192ED03ULL + 0x632BE59BD9B4E019ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Named sub-streams so that independent consumers of one experiment seed never
/// share draws.
namespace stream {
inline constexpr std::uint64_t kBaseInit = 1;
inline constexpr std::uint64_t kProjectorInit = 2;
inline constexpr std::uint64_t kBatchOrder = 3;
inline constexpr std::uint64_t kBaseDropout = 4;
inline constexpr std::uint64_t kProjectorDropout = 5;
inline constexpr std::uint64_t kSeriesShuffle = 6;
inline constexpr std::uint64_t kTextShuffle = 7;
inline constexpr std::uint64_t kMask = 8;
inline constexpr std::uint64_t kSynthetic = 9;
}  // namespace stream

}  // namespace tats
