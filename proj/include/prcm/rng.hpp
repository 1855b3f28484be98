// Deterministic randomness. mt19937_64 produces a bit-exact sequence fixed by
// the standard, so seeds are portable; all variates are derived from raw
// 64-bit draws here (std::uniform_*_distribution is implementation-defined).
#pragma once

#include <cstdint>
#include <random>

#include "prcm/rational.hpp"

namespace prcm {

uint64_t splitmix64(uint64_t x);

// Chain k of a run with master seed s is seeded with chain_seed(s, k).
inline uint64_t chain_seed(uint64_t master, uint64_t k) {
  return splitmix64(master ^ (0x9e3779b97f4a7c15ULL * (k + 1)));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t u64() { return eng_(); }

  // Uniform in [0, n), unbiased via rejection. n > 0.
  uint64_t below(uint64_t n);
  Int below_big(const Int& n);

  // Exact Bernoulli(p) for rational p in [0,1].
  bool bernoulli(const Rat& p);

  // 53-bit uniform in [0,1); only for non-exact estimators.
  double unit() { return (u64() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace prcm
