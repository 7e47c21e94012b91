#pragma once

#include <cstdint>
#include <random>

namespace bkt {

/// SplitMix64 finalizer. Used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Deterministic seed derivation: mixes a base seed with two stream
/// identifiers (e.g. skill index and restart index, or a student index).
/// Fixed function so that reordering or parallelising work over streams
/// can never change the draws inside a stream.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t x = splitmix64(seed ^ 0x8B72E64F61340F4Bull);
    x = splitmix64(x ^ splitmix64(a));
    x = splitmix64(x ^ splitmix64(b));
    return x;
}

/// Seeded generator with explicit, implementation-independent conversions.
/// std::uniform_real_distribution is not pinned down by the standard, so all
/// draws go through unit()/below() to keep results identical everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1), 53 random bits.
    double unit() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). n must be >= 1. Modulo reduction: the
    /// bias is negligible for the small n used here and the result is
    /// reproducible across platforms, which is what matters.
    std::uint64_t below(std::uint64_t n) {
        return engine_() % n;
    }

    /// Bernoulli draw with success probability p.
    bool bernoulli(double p) {
        return unit() < p;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace bkt
