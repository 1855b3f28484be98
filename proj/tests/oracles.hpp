// Independent brute-force oracles used by tests only. Everything here is
// deliberately naive: exhaustive enumeration, cofactor determinants,
// textbook incomplete gamma. Library code must never include this.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "prcm/rational.hpp"
#include "prcm/zq_linalg.hpp"

namespace oracle {

using prcm::Int;
using Vec = std::vector<int64_t>;

inline int64_t omod(int64_t v, int64_t q) {
  int64_t r = v % q;
  return r < 0 ? r + q : r;
}

// Span of generator rows over Z_q by enumerating all q^k coefficient tuples.
inline std::set<Vec> brute_span(const std::vector<Vec>& gens, int64_t q,
                                int cols) {
  std::set<Vec> out;
  size_t k = gens.size();
  std::vector<int64_t> coef(k, 0);
  while (true) {
    Vec v(cols, 0);
    for (size_t j = 0; j < k; ++j)
      for (int c = 0; c < cols; ++c)
        v[c] = omod(v[c] + coef[j] * gens[j][c], q);
    out.insert(v);
    size_t j = 0;
    for (; j < k; ++j) {
      if (++coef[j] < q) break;
      coef[j] = 0;
    }
    if (j == k) break;
  }
  return out;
}

inline Vec mat_vec(const prcm::ModMatrix& M, const Vec& x) {
  Vec out(M.rows, 0);
  for (int r = 0; r < M.rows; ++r)
    for (int c = 0; c < M.cols; ++c)
      out[r] = omod(out[r] + M.a[r][c] * x[c], M.q);
  return out;
}

inline std::set<Vec> brute_kernel(const prcm::ModMatrix& M) {
  std::set<Vec> out;
  Vec x(M.cols, 0);
  while (true) {
    bool zero = true;
    for (int64_t v : mat_vec(M, x))
      if (v) zero = false;
    if (zero) out.insert(x);
    int j = 0;
    for (; j < M.cols; ++j) {
      if (++x[j] < M.q) break;
      x[j] = 0;
    }
    if (j == M.cols) break;
  }
  return out;
}

inline std::set<Vec> brute_image(const prcm::ModMatrix& M) {
  std::set<Vec> out;
  Vec x(M.cols, 0);
  while (true) {
    out.insert(mat_vec(M, x));
    int j = 0;
    for (; j < M.cols; ++j) {
      if (++x[j] < M.q) break;
      x[j] = 0;
    }
    if (j == M.cols) break;
  }
  return out;
}

inline std::set<Vec> brute_solutions(const prcm::ModMatrix& M, const Vec& b) {
  std::set<Vec> out;
  Vec x(M.cols, 0);
  while (true) {
    if (mat_vec(M, x) == b) out.insert(x);
    int j = 0;
    for (; j < M.cols; ++j) {
      if (++x[j] < M.q) break;
      x[j] = 0;
    }
    if (j == M.cols) break;
  }
  return out;
}

// Cofactor-expansion determinant; fine for the <= 6x6 oracle sizes.
inline Int det(const std::vector<std::vector<Int>>& a) {
  size_t n = a.size();
  if (n == 0) return 1;
  if (n == 1) return a[0][0];
  Int sum = 0;
  for (size_t j = 0; j < n; ++j) {
    if (a[0][j] == 0) continue;
    std::vector<std::vector<Int>> minor;
    for (size_t r = 1; r < n; ++r) {
      std::vector<Int> row;
      for (size_t c = 0; c < n; ++c)
        if (c != j) row.push_back(a[r][c]);
      minor.push_back(std::move(row));
    }
    Int term = a[0][j] * det(minor);
    sum += (j % 2 == 0) ? term : -term;
  }
  return sum;
}

// gcd of all k x k minors (0 when all vanish). d_1*...*d_k of the Smith form
// equals minors_gcd(k), giving d_k = g_k / g_{k-1}.
inline Int minors_gcd(const std::vector<std::vector<Int>>& a, int k) {
  int n = static_cast<int>(a.size());
  int m = n ? static_cast<int>(a[0].size()) : 0;
  if (k == 0) return 1;
  if (k > n || k > m) return 0;
  Int g = 0;
  std::vector<int> rs(k), cs(k);
  for (int i = 0; i < k; ++i) rs[i] = i;
  while (true) {
    for (int i = 0; i < k; ++i) cs[i] = i;
    while (true) {
      std::vector<std::vector<Int>> sub(k, std::vector<Int>(k));
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) sub[i][j] = a[rs[i]][cs[j]];
      Int d = det(sub);
      mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), d.get_mpz_t());
      int j = k - 1;
      while (j >= 0 && cs[j] == m - k + j) --j;
      if (j < 0) break;
      ++cs[j];
      for (int t = j + 1; t < k; ++t) cs[t] = cs[t - 1] + 1;
    }
    int j = k - 1;
    while (j >= 0 && rs[j] == n - k + j) --j;
    if (j < 0) break;
    ++rs[j];
    for (int t = j + 1; t < k; ++t) rs[t] = rs[t - 1] + 1;
  }
  return abs(g);
}

// Regularized lower incomplete gamma P(a, x): series for x < a+1, Lentz
// continued fraction otherwise.
inline double gammp(double a, double x) {
  if (x <= 0) return 0.0;
  double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -1.0 * i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

inline double chi_square_cdf(double stat, int dof) {
  return gammp(dof / 2.0, stat / 2.0);
}

// Union-find cluster counter for the i=1 classical reduction.
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
  int components() {
    int c = 0;
    for (size_t i = 0; i < parent.size(); ++i)
      if (find(static_cast<int>(i)) == static_cast<int>(i)) ++c;
    return c;
  }
};

}  // namespace oracle
