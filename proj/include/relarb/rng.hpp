#pragma once

#include <cstdint>
#include <random>

namespace relarb {

/// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of path `index` within an ensemble keyed by `master_seed`.
///
/// Depends only on the pair, so ensembles are reproducible irrespective of
/// the order (or thread) in which paths are generated.
std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t index) noexcept;

/// Independent stream derived from a path seed; used for Brownian-bridge
/// refinement draws so that the primary increments stay untouched.
std::uint64_t bridge_seed(std::uint64_t seed) noexcept;

/// Standard normal draws in a fixed order from a 64-bit Mersenne twister.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double operator()() { return normal_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace relarb
