// Homology of finite cubical complexes, always unreduced. Group orders over
// Z_q come from two permanently separate routes: Howell spans mod q, and
// integral Smith normal form pushed through universal coefficients. Tests
// compare the routes; production code may call either.
#pragma once

#include <cstdint>
#include <vector>

#include "prcm/lattice.hpp"
#include "prcm/zq_linalg.hpp"

namespace prcm {

// d_k : C_k -> C_{k-1}; column j is the signed face chain of the j-th k-cell.
// Throws if a face is missing from the complex. d_0 has zero rows.
IntMatrix boundary_matrix(const CellComplex& K, int k);

// The boundary chain of one k-cell as a vector over K's (k-1)-cells, reduced
// mod q. Throws if a face is missing. Cheaper than building the full matrix
// when only a few columns are needed.
std::vector<int64_t> boundary_column_mod(const CellComplex& K, const Cell& c,
                                         int64_t q);

// |H_k(K; Z_q)| = q^{n_k} / (|im d_k| * |im d_{k+1}|).
Int homology_size_mod(const CellComplex& K, int k, int64_t q);

// Same, from a raw chain slice d_k : Z^{n_k} -> ..., d_{k+1} into Z^{n_k}.
// Lets tests exercise torsion on synthetic complexes.
Int homology_size_mod(const IntMatrix& dk, const IntMatrix& dk1, int64_t q);

// |H^k(K; Z_q)| via the transposed (coboundary) maps. Numerically equal to
// the homology size for every finite complex; kept as an independent route.
Int cohomology_size_mod(const CellComplex& K, int k, int64_t q);

// Unreduced integral homology Z^betti + sum Z_t over torsion divisors t > 1.
struct IntegralHomology {
  int betti = 0;
  std::vector<Int> torsion;
};

IntegralHomology integral_homology(const CellComplex& K, int k);
IntegralHomology integral_homology(const IntMatrix& dk, const IntMatrix& dk1);

// Universal-coefficient order of H_k(K; Z_q) from integral data in degrees
// k and k-1: q^betti_k * prod gcd(t, q) over both torsion lists.
Int size_from_integral(const IntegralHomology& hk,
                       const IntegralHomology& hkm1, int64_t q);

// Smallest divisor m of q with m*v inside the span: the order of [v] in
// Z_q^cols / span(h). v must have h.cols entries.
int64_t class_order(const std::vector<int64_t>& v, const HowellForm& h);

// Order of the image of a map between quotients presented over one ambient
// column space: |span(numerator_extra + denominator) / span(denominator)|.
// Used for inclusion-induced maps with numerator_extra = cycles of the
// subcomplex and denominator = boundaries of the ambient complex.
Int induced_image_size(const std::vector<std::vector<int64_t>>& numerator_extra,
                       const HowellForm& denominator);

// Inclusion-induced map H_k(sub; Z_q) -> H_k(big; Z_q). Every k-cell of sub
// must appear in big. image_size * kernel_size = |H_k(sub; Z_q)|.
struct InducedImage {
  Int image_size, kernel_size;
};
InducedImage induced_image(const CellComplex& sub, const CellComplex& big,
                           int k, int64_t q);

// |H_{i-1}(P union shell(r, dims <= i); Z_q)|: the wired cluster term, with
// every boundary cell of the box adjoined.
Int wired_size(const CellComplex& P, const Box& r, int i, int64_t q);

// Order of [boundary(sigma)] in H_{i-1}(P; Z_q) for an i-cell sigma whose
// faces lie in P. Equals |H_{i-1}(P)| / |H_{i-1}(P + sigma)|.
int64_t boundary_class_order(const CellComplex& P, const Cell& sigma,
                             int64_t q);

}  // namespace prcm
