#pragma once

#include <cstdint>

namespace deog {

// Deterministic xoshiro256++ generator with Box-Muller normals.
// The stream is fully defined by the seed and is identical across
// platforms; two instances with equal seeds produce equal samples.
//
// Normals are produced in Box-Muller pairs: each pair consumes two
// uniforms, the first value is returned immediately and the second is
// cached and returned by the next call. The cache is part of the
// generator state, so drawing n normals twice equals drawing 2n once.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal.
  double normal();

  // Derives an independent seed from this generator's seed and a stream
  // id without touching this generator's state. Used to give batch
  // members and subjects their own reproducible streams.
  static std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

 private:
  std::uint64_t state_[4];
  bool has_spare_{false};
  double spare_{0.0};
};

}  // namespace deog
