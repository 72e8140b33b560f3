#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace polyforge {

/// Seeded generator whose draws are identical on every platform.
///
/// std::mt19937_64's output sequence is fixed by the standard, but the
/// <random> distributions are not, so the conversions to unit reals and
/// bounded integers are done here by hand.
class SeededRng {
 public:
  static constexpr std::uint64_t kDefaultSeed = 42;

  explicit SeededRng(std::uint64_t seed = kDefaultSeed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform real in [0, 1) with 53 bits of resolution.
  double next_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::size_t uniform_index(std::size_t bound) {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t b = bound;
    const std::uint64_t threshold = (0 - b) % b;
    for (;;) {
      const std::uint64_t x = engine_();
      __extension__ using u128 = unsigned __int128;
      const u128 m = static_cast<u128>(x) * b;
      if (static_cast<std::uint64_t>(m) >= threshold) {
        return static_cast<std::size_t>(m >> 64);
      }
    }
  }

  bool bernoulli(double p) { return next_unit() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace polyforge
