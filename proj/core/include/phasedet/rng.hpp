#pragma once

#include <cstddef>
#include <cstdint>

namespace phasedet {

// Deterministic 64-bit generator (splitmix64). Every stochastic component of
// the toolkit draws from an Rng seeded through derive_seed(), so any tree,
// surgery or fold can be reproduced in isolation from the master seed.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double next_double();

  // Uniform in [0, n). Rejection sampling, no modulo bias. n must be > 0.
  std::size_t uniform_index(std::size_t n);

  // Uniform in [lo, hi], inclusive.
  int uniform_int(int lo, int hi);

  bool bernoulli(double p);

  // Box-Muller. stddev 0 returns mean exactly.
  double normal(double mean, double stddev);

private:
  std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and up to two stream
// ids (e.g. tree index, node index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace phasedet
