#ifndef PRIORSFM_UTIL_RNG_H_
#define PRIORSFM_UTIL_RNG_H_

#include <cstdint>

namespace priorsfm {

// Deterministic random number generator with a fixed, platform-independent
// output sequence. The standard <random> distributions are implementation
// defined, which would break bit-reproducibility of seeded runs, so sampling
// is done by hand on top of a xoshiro256++ stream seeded via splitmix64.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t NextU64();

  // Uniform double in [0, 1).
  double Uniform();

  // Uniform double in [lo, hi).
  double Uniform(double lo, double hi);

  // Uniform integer in [lo, hi], inclusive. Uses rejection sampling so the
  // result is exactly uniform and identical on every platform.
  int UniformInt(int lo, int hi);

  // Standard normal deviate via Box-Muller. No spare value is cached: each
  // call consumes exactly two uniforms, keeping call sequences predictable.
  double Gaussian();

  double Gaussian(double mean, double stddev);

  // Derives an independent child generator. Children with distinct stream
  // ids are decorrelated from the parent and from each other, which lets
  // per-image noise be independent of the order images are processed in.
  Rng Fork(uint64_t stream) const;

 private:
  uint64_t state_[4];
};

}  // namespace priorsfm

#endif  // PRIORSFM_UTIL_RNG_H_
