#pragma once

#include <cstdint>
#include <random>

namespace hybridaug {

/// SplitMix64 finalizer; used to derive independent per-draw streams from a
/// run seed so that results do not depend on evaluation order.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t run_seed, std::uint64_t stream,
                                    std::uint64_t salt = 0) noexcept {
    return mix64(mix64(run_seed ^ salt) + stream);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [lo, hi); returns lo when the interval is empty.
    double uniform(double lo, double hi) {
        if (!(hi > lo)) return lo;
        return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }

    /// Uniform integer on the closed interval [lo, hi].
    long long uniform_int(long long lo, long long hi) {
        return std::uniform_int_distribution<long long>(lo, hi)(engine_);
    }

    std::size_t index(std::size_t size) {
        return static_cast<std::size_t>(uniform_int(0, static_cast<long long>(size) - 1));
    }

    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace hybridaug
