#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace wsod {

/// splitmix64 step; the standard 64-bit finalizer used for seed expansion.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministically combine a base seed with a sequence of stream tags.
/// Used to derive independent sub-seeds (per class, per frame, per trial)
/// so that parallel or reordered work never shares an RNG stream.
inline std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = base;
  splitmix64(s);
  for (std::uint64_t t : tags) {
    s ^= t + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    splitmix64(s);
  }
  std::uint64_t out = s;
  return splitmix64(out);
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags = {}) {
  return std::mt19937_64(mix_seed(base, tags));
}

}  // namespace wsod
