#include "prcm/zq_linalg.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace prcm {

namespace {

using i64 = int64_t;
using i128 = __int128;

i64 mod_pos(i128 v, i64 q) {
  i64 r = static_cast<i64>(v % q);
  return r < 0 ? r + q : r;
}

// g = gcd(a,b) >= 0 with s*a + t*b = g.
struct Egcd {
  i64 g, s, t;
};
Egcd egcd(i64 a, i64 b) {
  if (b == 0) return a >= 0 ? Egcd{a, 1, 0} : Egcd{-a, -1, 0};
  Egcd e = egcd(b, a % b);
  return Egcd{e.g, e.t, e.s - (a / b) * e.t};
}

i64 gcd64(i64 a, i64 b) { return std::gcd(a, b); }

// Unit u mod q with u*a == gcd(a,q) (mod q). Requires a in [1, q).
i64 unit_for(i64 a, i64 q) {
  i64 g = gcd64(a, q);
  i64 a1 = a / g, n1 = q / g;
  if (n1 == 1) return 1;
  Egcd e = egcd(a1 % n1, n1);
  i64 u = ((e.s % n1) + n1) % n1;
  if (u == 0) u = n1;
  while (gcd64(u, q) != 1) u += n1;
  return u % q == 0 ? 1 : u % q;
}

using Row = std::vector<i64>;

void row_addmul(Row& dst, const Row& src, i64 c, i64 q) {
  for (size_t k = 0; k < dst.size(); ++k)
    dst[k] = mod_pos(static_cast<i128>(dst[k]) + static_cast<i128>(c) * src[k],
                     q);
}

void row_scale(Row& r, i64 c, i64 q) {
  for (auto& v : r) v = mod_pos(static_cast<i128>(c) * v, q);
}

int leading(const Row& r) {
  for (size_t k = 0; k < r.size(); ++k)
    if (r[k]) return static_cast<int>(k);
  return -1;
}

// Row echelon over Z_q with canonical pivots (divisors of q), entries above
// pivots reduced. Unimodular 2x2 combinations preserve the row span exactly.
void triangularize(std::vector<Row>& w, i64 q, int cols) {
  size_t r = 0;
  for (int col = 0; col < cols && r < w.size(); ++col) {
    size_t piv = r;
    while (piv < w.size() && w[piv][col] == 0) ++piv;
    if (piv == w.size()) continue;
    std::swap(w[r], w[piv]);
    for (size_t j = r + 1; j < w.size(); ++j) {
      if (w[j][col] == 0) continue;
      i64 a = w[r][col], b = w[j][col];
      Egcd e = egcd(a, b);
      Row nr = w[r], nj = w[j];
      row_scale(nr, mod_pos(e.s, q), q);
      row_addmul(nr, w[j], mod_pos(e.t, q), q);
      row_scale(nj, mod_pos(a / e.g, q), q);
      row_addmul(nj, w[r], mod_pos(-(b / e.g), q), q);
      w[r] = std::move(nr);
      w[j] = std::move(nj);
    }
    i64 a = w[r][col];
    if (a != 0) {
      row_scale(w[r], unit_for(a, q), q);
      ++r;
    }
  }
  // Drop zero rows.
  w.erase(std::remove_if(w.begin(), w.end(),
                         [](const Row& x) { return leading(x) < 0; }),
          w.end());
  // Reduce entries above each pivot modulo the pivot value.
  for (size_t i = 0; i < w.size(); ++i) {
    int c = leading(w[i]);
    i64 p = w[i][c];
    for (size_t j = 0; j < i; ++j) {
      i64 t = w[j][c] / p;
      if (t) row_addmul(w[j], w[i], q - mod_pos(t, q), q);
    }
  }
}

}  // namespace

int64_t mod_reduce(Int v, int64_t q) {
  Int r = v % q;
  if (r < 0) r += q;
  return r.get_si();
}

void IntMatrix::add(int r, int c, Int v) {
  if (r < 0 || r >= rows || c < 0 || c >= cols)
    throw std::out_of_range("IntMatrix::add");
  trip.emplace_back(r, c, std::move(v));
}

std::vector<std::vector<Int>> IntMatrix::to_dense() const {
  std::vector<std::vector<Int>> d(rows, std::vector<Int>(cols, 0));
  for (const auto& [r, c, v] : trip) d[r][c] += v;
  return d;
}

IntMatrix IntMatrix::from_dense(const std::vector<std::vector<Int>>& d) {
  IntMatrix m(static_cast<int>(d.size()),
              d.empty() ? 0 : static_cast<int>(d[0].size()));
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      if (d[r][c] != 0) m.add(r, c, d[r][c]);
  return m;
}

ModMatrix::ModMatrix(int64_t q_, int r, int c) : q(q_), rows(r), cols(c) {
  if (q < 1) throw std::invalid_argument("ModMatrix: q < 1");
  a.assign(rows, std::vector<i64>(cols, 0));
}

ModMatrix ModMatrix::from_int(const IntMatrix& m, int64_t q) {
  ModMatrix out(q, m.rows, m.cols);
  for (const auto& [r, c, v] : m.trip)
    out.a[r][c] = mod_pos(static_cast<i128>(out.a[r][c]) + mod_reduce(v, q), q);
  return out;
}

void ModMatrix::set(int r, int c, int64_t v) {
  a.at(r).at(c) = mod_pos(v, q);
}

Int HowellForm::span_size() const {
  Int s = 1;
  for (i64 p : pivot_val) s *= Int(q / p);
  return s;
}

HowellForm howell_form(const ModMatrix& generators) {
  i64 q = generators.q;
  int cols = generators.cols;
  HowellForm out;
  out.q = q;
  out.cols = cols;
  if (q == 1) return out;  // Z_1 module is trivial

  std::vector<Row> w;
  for (const auto& r : generators.a)
    if (leading(r) >= 0) w.push_back(r);
  triangularize(w, q, cols);

  // Howell closure: annihilator shadows (q/p)*row must lie in the span of the
  // later rows; iterate until nothing new appears.
  while (true) {
    std::vector<Row> extra;
    for (const Row& r : w) {
      int c = leading(r);
      Row s = r;
      row_scale(s, q / r[c], q);
      // reduce s against rows with larger pivot columns
      for (const Row& t : w) {
        int ct = leading(t);
        if (ct <= c || s[ct] == 0) continue;
        i64 f = s[ct] / t[ct];
        if (f) row_addmul(s, t, q - mod_pos(f, q), q);
      }
      if (leading(s) >= 0) extra.push_back(std::move(s));
    }
    if (extra.empty()) break;
    for (auto& e : extra) w.push_back(std::move(e));
    triangularize(w, q, cols);
  }

  out.rows = std::move(w);
  for (const Row& r : out.rows) {
    int c = leading(r);
    out.pivot_col.push_back(c);
    out.pivot_val.push_back(r[c]);
  }
  return out;
}

HowellForm howell_form(const IntMatrix& generators, int64_t q) {
  return howell_form(ModMatrix::from_int(generators, q));
}

std::vector<int64_t> howell_reduce(const HowellForm& h, std::vector<i64> v) {
  if (static_cast<int>(v.size()) != h.cols)
    throw std::invalid_argument("howell_reduce: size mismatch");
  if (h.q == 1) return std::vector<i64>(v.size(), 0);
  for (auto& x : v) x = mod_pos(x, h.q);
  for (int i = 0; i < h.nrows(); ++i) {
    int c = h.pivot_col[i];
    i64 f = v[c] / h.pivot_val[i];
    if (f) row_addmul(v, h.rows[i], h.q - f, h.q);
  }
  return v;
}

bool howell_member(const HowellForm& h, const std::vector<i64>& v) {
  return leading(howell_reduce(h, v)) < 0;
}

HowellForm howell_extend(const HowellForm& h,
                         const std::vector<Row>& extra) {
  ModMatrix gen(h.q, h.nrows() + static_cast<int>(extra.size()), h.cols);
  for (int r = 0; r < h.nrows(); ++r) gen.a[r] = h.rows[r];
  for (size_t r = 0; r < extra.size(); ++r) {
    if (static_cast<int>(extra[r].size()) != h.cols)
      throw std::invalid_argument("howell_extend: size mismatch");
    for (int c = 0; c < h.cols; ++c)
      gen.a[h.nrows() + r][c] = mod_pos(extra[r][c], h.q);
  }
  return howell_form(gen);
}

namespace {

// Augmented Howell form of {[Mx | x] : x in Z_q^n}; shared by kernel, solve,
// and sampling. Left block = image coordinates, right block = domain.
struct Augmented {
  HowellForm h;
  int m = 0, n = 0;
};

Augmented augmented_form(const ModMatrix& M) {
  Augmented out;
  out.m = M.rows;
  out.n = M.cols;
  ModMatrix gen(M.q, M.cols, M.rows + M.cols);
  for (int j = 0; j < M.cols; ++j) {
    for (int r = 0; r < M.rows; ++r) gen.a[j][r] = M.a[r][j];
    gen.a[j][M.rows + j] = M.q == 1 ? 0 : 1;
  }
  out.h = howell_form(gen);
  return out;
}

}  // namespace

ModuleMapSummary kernel_mod(const ModMatrix& M) {
  Augmented aug = augmented_form(M);
  ModuleMapSummary out;
  out.q = M.q;
  out.domain_cols = M.cols;
  out.kernel.q = M.q;
  out.kernel.cols = M.cols;
  out.kernel_size = 1;
  out.image_size = 1;
  for (int i = 0; i < aug.h.nrows(); ++i) {
    if (aug.h.pivot_col[i] < aug.m) {
      out.image_size *= Int(M.q / aug.h.pivot_val[i]);
    } else {
      Row right(aug.h.rows[i].begin() + aug.m, aug.h.rows[i].end());
      out.kernel.rows.push_back(std::move(right));
      out.kernel.pivot_col.push_back(aug.h.pivot_col[i] - aug.m);
      out.kernel.pivot_val.push_back(aug.h.pivot_val[i]);
      out.kernel_size *= Int(M.q / aug.h.pivot_val[i]);
    }
  }
  return out;
}

std::optional<std::vector<int64_t>> solve_mod(const ModMatrix& M,
                                              const std::vector<i64>& b) {
  if (static_cast<int>(b.size()) != M.rows)
    throw std::invalid_argument("solve_mod: size mismatch");
  if (M.q == 1) return std::vector<i64>(M.cols, 0);
  Augmented aug = augmented_form(M);
  Row v(b);
  for (auto& x : v) x = mod_pos(x, M.q);
  Row x(M.cols, 0);
  for (int i = 0; i < aug.h.nrows(); ++i) {
    int c = aug.h.pivot_col[i];
    if (c >= aug.m) break;
    i64 p = aug.h.pivot_val[i];
    i64 f = v[c] / p;
    if (v[c] % p) return std::nullopt;  // Howell: greedy failure is final
    if (f == 0) continue;
    for (int k = 0; k < aug.m; ++k)
      v[k] = mod_pos(static_cast<i128>(v[k]) -
                         static_cast<i128>(f) * aug.h.rows[i][k],
                     M.q);
    for (int k = 0; k < aug.n; ++k)
      x[k] = mod_pos(static_cast<i128>(x[k]) +
                         static_cast<i128>(f) * aug.h.rows[i][aug.m + k],
                     M.q);
  }
  if (leading(v) >= 0) return std::nullopt;
  return x;
}

std::vector<int64_t> uniform_solution_sample(const ModMatrix& M,
                                             const std::vector<i64>& b,
                                             Rng& rng) {
  auto x0 = solve_mod(M, b);
  if (!x0) throw std::domain_error("uniform_solution_sample: no solution");
  ModuleMapSummary s = kernel_mod(M);
  Row x = *x0;
  for (int i = 0; i < s.kernel.nrows(); ++i) {
    i64 range = M.q / s.kernel.pivot_val[i];
    i64 c = static_cast<i64>(rng.below(static_cast<uint64_t>(range)));
    if (c) row_addmul(x, s.kernel.rows[i], c, M.q);
  }
  return x;
}

Int column_span_size(const ModMatrix& M) {
  ModMatrix t(M.q, M.cols, M.rows);
  for (int r = 0; r < M.rows; ++r)
    for (int c = 0; c < M.cols; ++c) t.a[c][r] = M.a[r][c];
  return howell_form(t).span_size();
}

// ---------------------------------------------------------------------------
// Smith normal form over Z.

namespace {

using Dense = std::vector<std::vector<Int>>;

struct SnfOps {
  Dense* U = nullptr;  // row ops mirror
  Dense* V = nullptr;  // col ops mirror
};

void row_swap(Dense& D, SnfOps& ops, int i, int j) {
  std::swap(D[i], D[j]);
  if (ops.U) std::swap((*ops.U)[i], (*ops.U)[j]);
}

void col_swap(Dense& D, SnfOps& ops, int i, int j) {
  for (auto& row : D) std::swap(row[i], row[j]);
  if (ops.V)
    for (auto& row : *ops.V) std::swap(row[i], row[j]);
}

void row_addmul_z(Dense& D, SnfOps& ops, int dst, int src, const Int& f) {
  for (size_t k = 0; k < D[dst].size(); ++k) D[dst][k] += f * D[src][k];
  if (ops.U) {
    auto& u = *ops.U;
    for (size_t k = 0; k < u[dst].size(); ++k) u[dst][k] += f * u[src][k];
  }
}

void col_addmul_z(Dense& D, SnfOps& ops, int dst, int src, const Int& f) {
  for (auto& row : D) row[dst] += f * row[src];
  if (ops.V)
    for (auto& row : *ops.V) row[dst] += f * row[src];
}

void row_negate(Dense& D, SnfOps& ops, int i) {
  for (auto& v : D[i]) v = -v;
  if (ops.U)
    for (auto& v : (*ops.U)[i]) v = -v;
}

Dense identity(int n) {
  Dense I(n, std::vector<Int>(n, 0));
  for (int i = 0; i < n; ++i) I[i][i] = 1;
  return I;
}

}  // namespace

SnfResult smith_normal_form(const IntMatrix& A, bool want_transforms) {
  Dense D = A.to_dense();
  int n = A.rows, m = A.cols;
  SnfResult out;
  out.has_transforms = want_transforms;
  Dense U, V;
  SnfOps ops;
  if (want_transforms) {
    U = identity(n);
    V = identity(m);
    ops.U = &U;
    ops.V = &V;
  }

  int t = 0;
  int bound = std::min(n, m);
  while (t < bound) {
    // Smallest-magnitude nonzero pivot in the trailing submatrix.
    int pr = -1, pc = -1;
    for (int i = t; i < n; ++i)
      for (int j = t; j < m; ++j)
        if (D[i][j] != 0 &&
            (pr < 0 || mpz_cmpabs(D[i][j].get_mpz_t(),
                                  D[pr][pc].get_mpz_t()) < 0)) {
          pr = i;
          pc = j;
        }
    if (pr < 0) break;
    if (pr != t) row_swap(D, ops, t, pr);
    if (pc != t) col_swap(D, ops, t, pc);

    bool clean = false;
    while (!clean) {
      clean = true;
      for (int j = t + 1; j < n; ++j) {
        if (D[j][t] == 0) continue;
        Int f;
        mpz_fdiv_q(f.get_mpz_t(), D[j][t].get_mpz_t(), D[t][t].get_mpz_t());
        row_addmul_z(D, ops, j, t, -f);
        if (D[j][t] != 0) {  // strictly smaller remainder becomes the pivot
          row_swap(D, ops, t, j);
          clean = false;
        }
      }
      if (!clean) continue;
      for (int k = t + 1; k < m; ++k) {
        if (D[t][k] == 0) continue;
        Int f;
        mpz_fdiv_q(f.get_mpz_t(), D[t][k].get_mpz_t(), D[t][t].get_mpz_t());
        col_addmul_z(D, ops, k, t, -f);
        if (D[t][k] != 0) {
          col_swap(D, ops, t, k);
          clean = false;
        }
      }
      if (!clean) continue;
      // Pivot must divide the trailing submatrix for the divisibility chain.
      for (int i = t + 1; i < n && clean; ++i)
        for (int j = t + 1; j < m && clean; ++j)
          if (D[i][j] % D[t][t] != 0) {
            row_addmul_z(D, ops, t, i, 1);
            clean = false;
          }
    }
    if (D[t][t] < 0) row_negate(D, ops, t);
    ++t;
  }

  for (int i = 0; i < t; ++i) out.diag.push_back(D[i][i]);
  out.rank = t;
  if (want_transforms) {
    out.U = std::move(U);
    out.V = std::move(V);
  }
  return out;
}

}  // namespace prcm
