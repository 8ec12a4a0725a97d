#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace tvmsm {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a master seed and a path of
// indices, e.g. (seed, replicate, resample). The result depends only on the
// arguments, never on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix64(master);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

// Stream tags, so that different consumers of one seed never collide.
namespace stream {
inline constexpr std::uint64_t posterior = 0x5053;
inline constexpr std::uint64_t overlap = 0x4f56;
inline constexpr std::uint64_t resample = 0x5253;
inline constexpr std::uint64_t pipeline = 0x5049;
inline constexpr std::uint64_t replicate = 0x5250;
inline constexpr std::uint64_t oracle = 0x4f52;
}  // namespace stream

}  // namespace tvmsm
