#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace evattn {

// Seeded generator with a fixed, portable output sequence.
//
// The engine is std::mt19937_64, whose output is pinned by the standard. The
// standard distributions are implementation-defined, so every derived draw is
// spelled out here instead:
//   below(n)      rejection sampling on the raw 64-bit output, then `x % n`
//   unit()        top 53 bits scaled by 2^-53, giving [0, 1)
//   exponential() -mean * log(1 - unit())
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Largest multiple of n that fits in 2^64, expressed without overflow.
    const std::uint64_t reject_from = UINT64_MAX - (UINT64_MAX % n + 1) % n;
    std::uint64_t x = next();
    while (x > reject_from) x = next();
    return x % n;
  }

  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  double exponential(double mean) { return -mean * std::log1p(-unit()); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace evattn
