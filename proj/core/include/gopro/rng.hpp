#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gopro {

// splitmix64 step; the standard finalizer used to decorrelate seed streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives a child seed from a root seed and a path of indices, e.g.
// split_seed(run_seed, {epoch, step, sample}). Children are independent
// streams: every consumer seeds its own engine, nothing shares global state.
inline std::uint64_t split_seed(std::uint64_t root,
                                std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(root);
  for (std::uint64_t p : path) {
    s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ull));
  }
  return s;
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed));
}

}  // namespace gopro
