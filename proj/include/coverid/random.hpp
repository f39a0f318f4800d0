#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace coverid {

using Rng = std::mt19937_64;

// All randomness hangs off one master seed; each consumer draws from its own
// named stream so adding draws in one place never perturbs another.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view stream);

inline Rng make_stream(std::uint64_t master_seed, std::string_view stream) {
  return Rng(derive_seed(master_seed, stream));
}

namespace streams {
inline constexpr std::string_view kInit = "init";
inline constexpr std::string_view kShuffle = "shuffle";
inline constexpr std::string_view kDropout = "dropout";
inline constexpr std::string_view kSampling = "sampling";
inline constexpr std::string_view kSynthetic = "synthetic";
inline constexpr std::string_view kControl = "control";
}  // namespace streams

}  // namespace coverid
