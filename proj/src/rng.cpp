#include "prcm/rng.hpp"

#include <stdexcept>

namespace prcm {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t Rng::below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n == 0");
  // Rejection keeps the draw exactly uniform.
  uint64_t lim = ~uint64_t{0} - (~uint64_t{0} % n);
  uint64_t r;
  do {
    r = u64();
  } while (r >= lim);
  return r % n;
}

Int Rng::below_big(const Int& n) {
  if (n <= 0) throw std::invalid_argument("Rng::below_big: n <= 0");
  if (mpz_fits_ulong_p(n.get_mpz_t()))
    return Int(static_cast<unsigned long>(below(n.get_ui())));
  size_t bits = mpz_sizeinbase(n.get_mpz_t(), 2);
  size_t words = (bits + 63) / 64;
  while (true) {
    Int r = 0;
    for (size_t w = 0; w < words; ++w) {
      mpz_mul_2exp(r.get_mpz_t(), r.get_mpz_t(), 64);
      uint64_t v = u64();
      Int chunk;
      mpz_import(chunk.get_mpz_t(), 1, 1, sizeof(uint64_t), 0, 0, &v);
      r |= chunk;
    }
    mpz_fdiv_r_2exp(r.get_mpz_t(), r.get_mpz_t(), bits);
    if (r < n) return r;
  }
}

bool Rng::bernoulli(const Rat& p) {
  if (sgn(p) < 0 || p > 1)
    throw std::invalid_argument("Rng::bernoulli: p outside [0,1]");
  if (sgn(p) == 0) return false;
  if (p == 1) return true;
  return below_big(p.get_den()) < p.get_num();
}

}  // namespace prcm
