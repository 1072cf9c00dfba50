#pragma once

#include <cstdint>

namespace ppt {

// splitmix64 step; used as a stable, platform-independent seed mixer.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic per-stream seed derived from a master seed and two indices
// (e.g. trial and SNR-point). The mapping is fixed for the lifetime of the
// file formats: changing it would silently change every archived result.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ (a + 0x165667b19e3779f9ULL));
    h = splitmix64(h ^ (b + 0x27d4eb2f165667c5ULL));
    return h;
}

}  // namespace ppt
