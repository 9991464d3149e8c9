#pragma once

#include <cstdint>
#include <random>

namespace einfact {

/// Stream salts so one user seed drives independent generators.
enum class Stream : std::uint32_t { Split = 1, Init = 2, Synth = 3, Noise = 4, Test = 5 };

inline std::mt19937_64 make_engine(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

} // namespace einfact
