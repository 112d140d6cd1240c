#pragma once

// Counter-based random numbers.  Every draw is a pure function of
// (key, counter), so samples can be generated in any order or on any thread
// and still reproduce the same stream.  The mixer is the SplitMix64
// finalizer; indexing its Weyl sequence directly gives random access.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

#include "mimoshape/types.hpp"

namespace mimoshape {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Folds a list of words into a single stream key.
inline constexpr std::uint64_t derive_key(std::uint64_t seed,
                                          std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t k = splitmix64(seed);
  for (auto w : words) k = splitmix64(k ^ splitmix64(w + 0x632BE59BD9B4E019ULL));
  return k;
}

class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return splitmix64(key_ + counter * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform on (0, 1].
  constexpr double uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard circularly symmetric complex Gaussian (unit total variance),
  /// consuming counters 2*index and 2*index + 1.
  Complex complex_normal(std::uint64_t index) const noexcept {
    const double u1 = uniform(2 * index);
    const double u2 = uniform(2 * index + 1);
    // Box-Muller gives two independent N(0,1); scale to 1/2 per real dimension.
    const double r = std::sqrt(-std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace mimoshape
