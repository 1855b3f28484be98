// Exact linear algebra: Smith normal form over Z and Howell normal form over
// Z_q (composite q handled natively). Matrices here are small (hundreds of
// rows/cols at most), so the normal forms are dense; entries over Z use GMP,
// entries mod q use int64 with 128-bit intermediate products.
#pragma once

#include <cstdint>
#include <optional>
#include <tuple>
#include <vector>

#include "prcm/rational.hpp"
#include "prcm/rng.hpp"

namespace prcm {

// Integer matrix built from sparse triplets; normal forms densify.
struct IntMatrix {
  int rows = 0, cols = 0;
  std::vector<std::tuple<int, int, Int>> trip;

  IntMatrix() = default;
  IntMatrix(int r, int c) : rows(r), cols(c) {}
  void add(int r, int c, Int v);
  std::vector<std::vector<Int>> to_dense() const;
  static IntMatrix from_dense(const std::vector<std::vector<Int>>& d);
};

// U * A * V = diag(diag) padded with zeros; diag holds the nonzero invariant
// factors d_1 | d_2 | ... | d_rank, all positive.
struct SnfResult {
  std::vector<Int> diag;
  int rank = 0;
  bool has_transforms = false;
  std::vector<std::vector<Int>> U, V;
};

SnfResult smith_normal_form(const IntMatrix& A, bool want_transforms = false);

// Matrix over Z_q, entries stored in [0, q). q >= 1 (q == 1 collapses all
// entries to zero).
struct ModMatrix {
  int64_t q = 1;
  int rows = 0, cols = 0;
  std::vector<std::vector<int64_t>> a;

  ModMatrix() = default;
  ModMatrix(int64_t q_, int r, int c);
  static ModMatrix from_int(const IntMatrix& m, int64_t q);
  void set(int r, int c, int64_t v);
};

// Canonical Howell basis of a row span in Z_q^cols. Rows are ordered by
// strictly increasing pivot column; each pivot value divides q; entries above
// a pivot are reduced modulo it; the span is closed under the Howell property
// (every span element vanishing on a prefix lies in the span of the rows
// whose pivots are past that prefix). Every span element has a unique
// representation sum c_j * row_j with 0 <= c_j < q / pivot_j, which is what
// makes span_size exact and coset sampling exactly uniform.
struct HowellForm {
  int64_t q = 1;
  int cols = 0;
  std::vector<std::vector<int64_t>> rows;
  std::vector<int> pivot_col;
  std::vector<int64_t> pivot_val;

  int nrows() const { return static_cast<int>(rows.size()); }
  Int span_size() const;
};

HowellForm howell_form(const ModMatrix& generators);
HowellForm howell_form(const IntMatrix& generators, int64_t q);

// Greedy pivot reduction; complete for membership because of the Howell
// property. Returns the residual (zero iff v is in the span).
std::vector<int64_t> howell_reduce(const HowellForm& h,
                                   std::vector<int64_t> v);
bool howell_member(const HowellForm& h, const std::vector<int64_t>& v);

// Extend a canonical form with extra generator rows.
HowellForm howell_extend(const HowellForm& h,
                         const std::vector<std::vector<int64_t>>& extra);

// Kernel and image of M : Z_q^cols -> Z_q^rows, via one Howell form of the
// augmented generators [column_j(M) | e_j]. kernel_size * image_size ==
// q^cols holds structurally.
struct ModuleMapSummary {
  int64_t q = 1;
  int domain_cols = 0;
  HowellForm kernel;  // Howell basis of ker M in Z_q^cols
  Int kernel_size, image_size;
};

ModuleMapSummary kernel_mod(const ModMatrix& M);

std::optional<std::vector<int64_t>> solve_mod(const ModMatrix& M,
                                              const std::vector<int64_t>& b);

// Exactly uniform over {x : Mx = b}; throws std::domain_error when empty.
std::vector<int64_t> uniform_solution_sample(const ModMatrix& M,
                                             const std::vector<int64_t>& b,
                                             Rng& rng);

// |column span of M| in Z_q^rows.
Int column_span_size(const ModMatrix& M);

int64_t mod_reduce(Int v, int64_t q);

}  // namespace prcm
