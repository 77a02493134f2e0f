#include "relarb/rng.hpp"

namespace relarb {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(master_seed) ^ splitmix64(~index));
}

std::uint64_t bridge_seed(std::uint64_t seed) noexcept {
    return splitmix64(seed ^ 0x6272696467650000ULL);
}

}  // namespace relarb
