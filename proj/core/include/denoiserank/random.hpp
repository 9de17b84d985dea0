#pragma once

#include <cstdint>
#include <random>

namespace denoiserank {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive well-separated seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent substream `stream` of the generator family rooted at `seed`.
// Streams only depend on (seed, stream), never on the order they are created,
// so per-query work can be scheduled on any thread.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632BE59BD9B4E019ULL)));
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace denoiserank
