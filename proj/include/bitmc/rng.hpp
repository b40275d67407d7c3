#pragma once

#include <cstdint>
#include <random>

namespace bitmc {

/// Seed for a reproducible random stream. The same seed always yields the
/// same draws, on every platform: streams come from std::mt19937_64 (whose
/// output sequence is fixed by the standard) seeded through a SplitMix64
/// mix of (seed, stream index), and uniform doubles are built directly from
/// the top 53 bits of the engine output.
struct RngSeed {
    std::uint64_t value = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Derive an independent substream seed from a base seed and a stream index.
inline RngSeed substream(RngSeed base, std::uint64_t index) {
    return RngSeed{detail::splitmix64(base.value ^ detail::splitmix64(index))};
}

/// Deterministic uniform generator over a single stream.
class Rng {
public:
    explicit Rng(RngSeed seed) : engine_(detail::splitmix64(seed.value)) {}

    /// Uniform on [0, 1) with a full 53-bit mantissa.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [-1/2, 1/2).
    double uniform_symmetric() { return uniform01() - 0.5; }

    bool bernoulli(double p) { return uniform01() < p; }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace bitmc
