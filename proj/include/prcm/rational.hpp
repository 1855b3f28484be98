// Exact integer/rational arithmetic used across the library (GMP-backed).
#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace prcm {

using Int = mpz_class;
using Rat = mpq_class;

inline Int int_pow(const Int& base, unsigned long e) {
  Int r;
  mpz_pow_ui(r.get_mpz_t(), base.get_mpz_t(), e);
  return r;
}

inline Int int_pow(long base, unsigned long e) { return int_pow(Int(base), e); }

// 0^0 == 1 by convention, as needed for p in {0,1} weight products.
inline Rat rat_pow(const Rat& base, unsigned long e) {
  Rat r;
  mpz_pow_ui(r.get_num().get_mpz_t(), base.get_num().get_mpz_t(), e);
  mpz_pow_ui(r.get_den().get_mpz_t(), base.get_den().get_mpz_t(), e);
  return r;
}

// Canonicalized rational a/b (mpq_class(a, b) alone does not reduce).
inline Rat make_rat(const Int& a, const Int& b) {
  Rat r(a, b);
  r.canonicalize();
  return r;
}

// Accepts "a/b", plain integers, and finite decimals ("0.25" -> 1/4).
Rat parse_rat(const std::string& s);

// Canonical "num/den" form (den always present), used in reports.
std::string rat_string(const Rat& r);

// log of a positive rational, accurate to ~1e-15 absolute: exact exponent via
// mpz_get_d_2exp plus a double-precision mantissa.
double log_rat(const Rat& r);

double rat_to_double(const Rat& r);

}  // namespace prcm
