#include "prcm/homology.hpp"

#include <numeric>
#include <stdexcept>

namespace prcm {

IntMatrix boundary_matrix(const CellComplex& K, int k) {
  int cols = K.ncells(k);
  int rows = (k >= 1) ? K.ncells(k - 1) : 0;
  IntMatrix m(rows, cols);
  if (k < 1) return m;
  for (int j = 0; j < cols; ++j) {
    for (auto& [face, sign] : cell_boundary(K.at(k).cells[j])) {
      int r = K.at(k - 1).find(face);
      if (r < 0) throw std::invalid_argument("boundary_matrix: open complex");
      m.add(r, j, sign);
    }
  }
  return m;
}

std::vector<int64_t> boundary_column_mod(const CellComplex& K, const Cell& c,
                                         int64_t q) {
  int k = c.dim();
  if (k < 1) return {};
  std::vector<int64_t> col(K.ncells(k - 1), 0);
  for (auto& [face, sign] : cell_boundary(c)) {
    int r = K.at(k - 1).find(face);
    if (r < 0) throw std::invalid_argument("boundary_column: open complex");
    col[r] = mod_reduce(Int(col[r] + sign), q);
  }
  return col;
}

Int homology_size_mod(const IntMatrix& dk, const IntMatrix& dk1, int64_t q) {
  if (dk.cols != dk1.rows)
    throw std::invalid_argument("chain slice: dimension mismatch");
  Int im_k = column_span_size(ModMatrix::from_int(dk, q));
  Int im_k1 = column_span_size(ModMatrix::from_int(dk1, q));
  Int total = int_pow(Int(q), dk.cols);
  Int denom = im_k * im_k1;
  if (total % denom != 0) throw std::logic_error("homology: non-divisor");
  return total / denom;
}

Int homology_size_mod(const CellComplex& K, int k, int64_t q) {
  if (k < 0 || k > K.max_dim()) return 1;
  return homology_size_mod(boundary_matrix(K, k), boundary_matrix(K, k + 1),
                           q);
}

namespace {

ModMatrix transpose_mod(const IntMatrix& m, int64_t q) {
  ModMatrix t(q, m.cols, m.rows);
  for (auto& [r, c, v] : m.trip)
    t.set(c, r, mod_reduce(v + t.a[c][r], q));
  return t;
}

}  // namespace

Int cohomology_size_mod(const CellComplex& K, int k, int64_t q) {
  if (k < 0 || k > K.max_dim()) return 1;
  // delta^k = transpose(d_{k+1}); |H^k| = q^{n_k} / (|im delta^k| *
  // |im delta^{k-1}|).
  Int im_up = column_span_size(transpose_mod(boundary_matrix(K, k + 1), q));
  Int im_dn = column_span_size(transpose_mod(boundary_matrix(K, k), q));
  Int total = int_pow(Int(q), K.ncells(k));
  Int denom = im_up * im_dn;
  if (total % denom != 0) throw std::logic_error("cohomology: non-divisor");
  return total / denom;
}

IntegralHomology integral_homology(const IntMatrix& dk, const IntMatrix& dk1) {
  if (dk.cols != dk1.rows)
    throw std::invalid_argument("chain slice: dimension mismatch");
  IntegralHomology out;
  auto snf_k = smith_normal_form(dk);
  auto snf_k1 = smith_normal_form(dk1);
  out.betti = dk.cols - snf_k.rank - snf_k1.rank;
  for (const Int& t : snf_k1.diag)
    if (t > 1) out.torsion.push_back(t);
  return out;
}

IntegralHomology integral_homology(const CellComplex& K, int k) {
  if (k < 0 || k > K.max_dim()) return {};
  return integral_homology(boundary_matrix(K, k), boundary_matrix(K, k + 1));
}

Int size_from_integral(const IntegralHomology& hk,
                       const IntegralHomology& hkm1, int64_t q) {
  Int out = int_pow(Int(q), hk.betti);
  Int qz(static_cast<long>(q));
  for (const Int& t : hk.torsion) out *= gcd(t, qz);
  for (const Int& t : hkm1.torsion) out *= gcd(t, qz);
  return out;
}

int64_t class_order(const std::vector<int64_t>& v, const HowellForm& h) {
  int64_t q = h.q;
  for (int64_t m = 1; m <= q; ++m) {
    if (q % m != 0) continue;
    std::vector<int64_t> mv(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
      mv[i] = (m * (v[i] % q)) % q;
      if (mv[i] < 0) mv[i] += q;
    }
    if (howell_member(h, mv)) return m;
  }
  throw std::logic_error("class_order: unreachable");
}

Int induced_image_size(
    const std::vector<std::vector<int64_t>>& numerator_extra,
    const HowellForm& denominator) {
  HowellForm joined = howell_extend(denominator, numerator_extra);
  Int num = joined.span_size();
  Int den = denominator.span_size();
  if (num % den != 0) throw std::logic_error("induced image: non-divisor");
  return num / den;
}

InducedImage induced_image(const CellComplex& sub, const CellComplex& big,
                           int k, int64_t q) {
  // Cycles of sub re-expressed over big's k-cell coordinates.
  auto ks = kernel_mod(ModMatrix::from_int(boundary_matrix(sub, k), q));
  std::vector<int> embed(sub.ncells(k));
  for (int j = 0; j < sub.ncells(k); ++j) {
    embed[j] = big.at(k).find(sub.at(k).cells[j]);
    if (embed[j] < 0)
      throw std::invalid_argument("induced_image: sub not inside big");
  }
  std::vector<std::vector<int64_t>> cycles;
  for (const auto& row : ks.kernel.rows) {
    std::vector<int64_t> v(big.ncells(k), 0);
    for (int j = 0; j < sub.ncells(k); ++j) v[embed[j]] = row[j];
    cycles.push_back(std::move(v));
  }
  ModMatrix gens(q, big.ncells(k + 1), big.ncells(k));
  for (int j = 0; j < big.ncells(k + 1); ++j)
    gens.a[j] = boundary_column_mod(big, big.at(k + 1).cells[j], q);
  InducedImage out;
  out.image_size = induced_image_size(cycles, howell_form(gens));
  Int hsub = homology_size_mod(sub, k, q);
  if (hsub % out.image_size != 0)
    throw std::logic_error("induced image: kernel non-divisor");
  out.kernel_size = hsub / out.image_size;
  return out;
}

Int wired_size(const CellComplex& P, const Box& r, int i, int64_t q) {
  std::vector<Cell> shell;
  for (int k = 0; k <= i; ++k)
    for (const Cell& c : boundary_shell(r, k)) shell.push_back(c);
  CellComplex u = complex_union(P, complex_from_cells(r.d(), shell));
  return homology_size_mod(u, i - 1, q);
}

int64_t boundary_class_order(const CellComplex& P, const Cell& sigma,
                             int64_t q) {
  int i = sigma.dim();
  ModMatrix gens(q, P.ncells(i), P.ncells(i - 1));
  for (int j = 0; j < P.ncells(i); ++j)
    gens.a[j] = boundary_column_mod(P, P.at(i).cells[j], q);
  return class_order(boundary_column_mod(P, sigma, q), howell_form(gens));
}

}  // namespace prcm
