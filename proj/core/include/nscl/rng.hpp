#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace nscl {

/// Seeded generator with platform-independent derived distributions.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// standard distributions are not; uniform and normal draws are derived here
/// so that runs are reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; the second variate is discarded to keep the stream simple.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  template <typename It>
  void shuffle(It first, It last) {
    for (auto n = last - first; n > 1; --n) {
      const auto j = static_cast<decltype(n)>(below(static_cast<std::uint64_t>(n)));
      std::iter_swap(first + (n - 1), first + j);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nscl
