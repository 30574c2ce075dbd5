#pragma once

#include <cstdint>
#include <random>

namespace istn {

using Rng = std::mt19937_64;

/// Named sub-streams so that geometry, fading, and error draws never share
/// engine state.
enum class Stream : std::uint32_t { geometry = 1, satellite = 2, interference = 3, terrestrial = 4, csit_error = 5 };

/// Engine for (seed, trial, stream); independent of call order and thread.
inline Rng child_rng(std::uint64_t seed, std::uint64_t trial, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

}  // namespace istn
