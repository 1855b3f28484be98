// Cubical cells of Z^d and its dual lattice in doubled coordinates.
//
// A k-cell is stored as (anchor, dirs): anchor is the doubled coordinate of
// the minimal corner (all-even entries = primal lattice, all-odd = dual
// lattice, i.e. Z^d + (1/2,...,1/2)), dirs is the sorted list of spanned
// direction indices in {1..d}. The cell occupies [a_j, a_j + 2] in doubled
// units along each spanned direction. The doubled center anchor + sum(e_j)
// determines the cell uniquely; dual_cell keeps the center and complements
// the direction set.
#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace prcm {

struct Cell {
  std::vector<int> anchor;  // doubled coordinates, uniform parity
  std::vector<int> dirs;    // sorted, distinct, values in 1..d

  int d() const { return static_cast<int>(anchor.size()); }
  int dim() const { return static_cast<int>(dirs.size()); }
  bool spans(int j) const;  // j in dirs
  auto operator<=>(const Cell&) const = default;  // lex on (anchor, dirs)
};

// Throws std::invalid_argument on malformed cells.
void validate_cell(const Cell& c);

enum class Convention { Open, Closed };

// Axis-aligned box, stored in doubled coordinates so dual boxes (all-odd
// corners) are representable. The convention only affects which cells of the
// model dimension i belong to the box complex:
//   Closed: all i-cells contained in the box;
//   Open:   i-cells meeting the box's relative interior (equivalently, all
//           i-cells except those contained in the boundary).
// Cells of dimension < i are the same for both conventions.
struct Box {
  std::vector<int> lo, hi;  // doubled, lo <= hi componentwise, uniform parity
  Convention conv = Convention::Closed;

  int d() const { return static_cast<int>(lo.size()); }
  bool on_dual_lattice() const { return !lo.empty() && (lo[0] & 1); }

  // Build from ordinary (undoubled) primal corner coordinates.
  static Box primal(std::vector<int> lo, std::vector<int> hi,
                    Convention conv = Convention::Closed);

  auto operator<=>(const Box&) const = default;
};

void validate_box(const Box& b);

bool cell_in_box(const Cell& c, const Box& b);
// Meets the relative interior: degenerate box coordinates impose no
// constraint, otherwise lo_j < a_j < hi_j is required in unspanned directions.
bool cell_meets_interior(const Cell& c, const Box& b);

// All k-cells of the box complex in lexicographic (anchor, dirs) order.
// The Open/Closed filter applies exactly when k == i (the model dimension).
std::vector<Cell> enumerate_cells(const Box& b, int k, int i);

// k-cells contained in the topological boundary of the box (relative to its
// affine span). Empty when k == d and the box is full-dimensional.
std::vector<Cell> boundary_shell(const Box& b, int k);

// Signed faces of c: pairs (face, +/-1). Ascending direction list d_1<...<d_k
// gives the face pair in d_j the signs (-1)^{j-1} (upper) and (-1)^j (lower).
std::vector<std::pair<Cell, int>> cell_boundary(const Cell& c);

// The complementary-dimension cell with the same doubled center on the other
// lattice. An involution.
Cell dual_cell(const Cell& c);

// Open [lo,hi] -> Closed [lo+1,hi-1]; Closed [lo,hi] -> Open [lo-1,hi+1]
// (doubled units). These are exactly the boxes carrying the duals of the box
// complex's i-cells as their (d-i)-cells. An involution.
Box dual_box(const Box& b);

// Text form "anchor=(a1,...,ad);dirs={j1,...}". parse_cell validates.
std::string format_cell(const Cell& c);
Cell parse_cell(const std::string& s);

// Dense index over a fixed-dimension cell list in enumeration order.
struct CellIndex {
  std::vector<Cell> cells;
  std::map<Cell, int> pos;

  CellIndex() = default;
  explicit CellIndex(std::vector<Cell> cs);
  int size() const { return static_cast<int>(cells.size()); }
  // -1 when absent.
  int find(const Cell& c) const;
};

// Explicit finite cubical complex: cell lists per dimension. Builders keep
// each dimension sorted and closed under faces where the math requires it
// (percolation complexes, shells, unions of such).
struct CellComplex {
  int d = 0;
  std::vector<CellIndex> dims;  // dims[k] = k-cells

  int max_dim() const { return static_cast<int>(dims.size()) - 1; }
  int ncells(int k) const {
    return (k >= 0 && k <= max_dim()) ? dims[k].size() : 0;
  }
  const CellIndex& at(int k) const { return dims[k]; }
};

// Cells of dimension 0..top of the box complex, with the convention filter
// applied at dimension i (pass top < i for a bare skeleton).
CellComplex box_complex(const Box& b, int top, int i);

CellComplex complex_from_cells(int d, const std::vector<Cell>& cells);

// complex_from_cells plus every iterated face of the input cells.
CellComplex complex_closure(int d, const std::vector<Cell>& cells);
CellComplex complex_union(const CellComplex& a, const CellComplex& b);

}  // namespace prcm
