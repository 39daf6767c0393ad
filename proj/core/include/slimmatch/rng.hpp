#pragma once

#include <cstdint>

namespace slimmatch {

// xorshift64* (Marsaglia shifts 12/25/27, multiplier 0x2545F4914F6CDD1D).
// The 64-bit seed is expanded with one splitmix64 step so that seed 0 is
// usable. Sequences are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller (no cached second value).
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace slimmatch
