#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace tagrec {

// Deterministic RNG helpers built on mt19937_64 raw output only.
// std::*_distribution is implementation-defined, so every draw used to
// build artifacts goes through these instead; outputs are identical on
// any platform for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = gen_();
      if (r >= threshold) return r % n;
    }
  }

  int index(std::size_t n) { return static_cast<int>(below(n)); }

  // Double in [0, 1) with 53 random bits.
  double real() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }

  // Box-Muller; one value per call, no cached spare (keeps draw count
  // independent of call pattern).
  double normal(double mean, double stddev) {
    double u1 = real();
    while (u1 == 0.0) u1 = real();
    const double u2 = real();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * mag * std::cos(6.283185307179586476925286766559 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace tagrec
