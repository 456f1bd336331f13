#pragma once

#include <cstdint>
#include <random>

namespace fmtrojan::detail {

/// Seed derivation so that sub-streams (trial i, jammer pair j, ...) are
/// independent of how many draws other streams made.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 0x51ed2701ull));
}

// std::uniform_int_distribution is implementation-defined; reports must be
// byte-identical across standard libraries, so draw with plain modulo.
inline std::uint64_t uniform_below(std::mt19937_64 &rng, std::uint64_t n) { return rng() % n; }

} // namespace fmtrojan::detail
