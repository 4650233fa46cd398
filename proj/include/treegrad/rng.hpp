#pragma once

#include <cstdint>
#include <random>

namespace treegrad {

// Deterministic uniform source threaded explicitly through every API that
// draws random numbers; there is no global generator. Uniforms are derived
// from raw mt19937_64 output so a given seed yields the same sequence on
// every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // uniform in [0, 1), 53 random bits
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace treegrad
