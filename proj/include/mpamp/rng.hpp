#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mpamp {

// SplitMix64 finalizer; used to derive independent stream seeds from a
// (base seed, counter...) tuple so parallel workers draw reproducible streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> counters) noexcept {
  std::uint64_t s = splitmix64(base);
  for (auto c : counters) s = splitmix64(s ^ splitmix64(c + 0x632BE59BD9B4E019ull));
  return s;
}

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t base, std::initializer_list<std::uint64_t> counters) {
  return Rng(derive_seed(base, counters));
}

}  // namespace mpamp
