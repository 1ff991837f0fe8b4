#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace lkgrf {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream from a master seed and a path of stream ids
/// (e.g. {radius index, replicate index}). Same inputs, same stream.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids = {}) {
  std::uint64_t state = seed;
  std::uint64_t mixed = splitmix64(state);
  for (std::uint64_t id : ids) {
    state ^= id + 0x632BE59BD9B4E019ULL + (mixed << 6) + (mixed >> 2);
    mixed = splitmix64(state);
  }
  std::seed_seq seq{static_cast<std::uint32_t>(mixed), static_cast<std::uint32_t>(mixed >> 32),
                    static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state))};
  return Rng(seq);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  Rng rng = make_stream(seed, ids);
  return rng();
}

}  // namespace lkgrf
