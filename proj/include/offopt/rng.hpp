#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "offopt/error.hpp"

namespace offopt {

/// Seeded random stream. All variates are derived from the raw mt19937_64
/// output (never from std::*_distribution, whose sequences are not pinned by
/// the standard), so a seed fully determines every byte this library emits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [lo, hi], endpoints included. Unbiased via rejection.
  int uniform_int(int lo, int hi) {
    if (lo > hi) throw InvalidArgument("Rng::uniform_int: lo > hi");
    const std::uint64_t span =
        static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) -
                                   static_cast<std::int64_t>(lo)) +
        1;
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() / span * span;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return lo + static_cast<int>(x % span);
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      const int j = uniform_int(0, i);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace offopt
