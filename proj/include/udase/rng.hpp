// Deterministic, platform-independent random streams.
//
// std distributions are implementation-defined, so sampling is done with
// explicit inverse-transform / Box-Muller code over a splitmix64 core.
// Child streams derived from (seed, index) make per-example generation
// independent of scheduling.

#ifndef UDASE_RNG_HPP
#define UDASE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace udase {

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // Warm up so that small seeds diverge immediately.
    next_u64();
    next_u64();
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

  double normal(double mean, double sigma) {
    if (sigma == 0.0) return mean;
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double z = std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    return mean + sigma * z;
  }

  // Independent stream for a given sub-task index.
  static Rng child(uint64_t seed, uint64_t index) {
    // One splitmix step over the index decorrelates adjacent streams.
    uint64_t z = index + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(seed ^ (z ^ (z >> 31)));
  }

 private:
  uint64_t state_;
};

}  // namespace udase

#endif  // UDASE_RNG_HPP
