#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace spinem {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream key from a root seed and a counter tuple
/// (sweep point, frame, purpose, ...). Keys depend only on the tuple, so
/// results do not depend on evaluation order.
inline std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
    std::uint64_t key = mix64(seed);
    for (std::uint64_t c : counters) {
        key = mix64(key ^ mix64(c + 0x632be59bd9b4e019ULL));
    }
    return key;
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> counters) {
    return std::mt19937_64(stream_key(seed, counters));
}

}  // namespace spinem
