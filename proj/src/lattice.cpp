#include "prcm/lattice.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace prcm {

bool Cell::spans(int j) const {
  return std::binary_search(dirs.begin(), dirs.end(), j);
}

void validate_cell(const Cell& c) {
  if (c.anchor.empty()) throw std::invalid_argument("cell: empty anchor");
  int parity = c.anchor[0] & 1;
  for (int a : c.anchor)
    if ((a & 1) != parity)
      throw std::invalid_argument("cell: mixed anchor parity");
  int prev = 0;
  for (int j : c.dirs) {
    if (j <= prev || j > c.d())
      throw std::invalid_argument("cell: dirs not sorted/distinct/in range");
    prev = j;
  }
}

Box Box::primal(std::vector<int> lo, std::vector<int> hi, Convention conv) {
  Box b;
  b.lo = std::move(lo);
  b.hi = std::move(hi);
  for (int& v : b.lo) v *= 2;
  for (int& v : b.hi) v *= 2;
  b.conv = conv;
  validate_box(b);
  return b;
}

void validate_box(const Box& b) {
  if (b.lo.empty() || b.lo.size() != b.hi.size())
    throw std::invalid_argument("box: bad corner dimensions");
  int parity = b.lo[0] & 1;
  for (size_t j = 0; j < b.lo.size(); ++j) {
    if ((b.lo[j] & 1) != parity || (b.hi[j] & 1) != parity)
      throw std::invalid_argument("box: mixed corner parity");
    if (b.lo[j] > b.hi[j]) throw std::invalid_argument("box: lo > hi");
  }
}

bool cell_in_box(const Cell& c, const Box& b) {
  if (c.d() != b.d()) return false;
  for (int j = 1; j <= b.d(); ++j) {
    int a = c.anchor[j - 1];
    if (c.spans(j)) {
      if (a < b.lo[j - 1] || a + 2 > b.hi[j - 1]) return false;
    } else {
      if (a < b.lo[j - 1] || a > b.hi[j - 1]) return false;
    }
  }
  return true;
}

bool cell_meets_interior(const Cell& c, const Box& b) {
  if (!cell_in_box(c, b)) return false;
  for (int j = 1; j <= b.d(); ++j) {
    if (c.spans(j)) continue;
    int lo = b.lo[j - 1], hi = b.hi[j - 1];
    if (lo == hi) continue;  // degenerate direction: relative interior
    int a = c.anchor[j - 1];
    if (a <= lo || a >= hi) return false;
  }
  return true;
}

namespace {

// All k-subsets of {1..d} and all anchors; sorted afterwards.
void for_each_subset(int d, int k, std::vector<int>& cur,
                     const std::function<void(const std::vector<int>&)>& fn,
                     int from = 1) {
  if (static_cast<int>(cur.size()) == k) {
    fn(cur);
    return;
  }
  for (int j = from; j <= d; ++j) {
    cur.push_back(j);
    for_each_subset(d, k, cur, fn, j + 1);
    cur.pop_back();
  }
}

}  // namespace

std::vector<Cell> enumerate_cells(const Box& b, int k, int i) {
  validate_box(b);
  if (k < 0 || k > b.d()) return {};
  std::vector<Cell> out;
  std::vector<int> dirs;
  for_each_subset(b.d(), k, dirs, [&](const std::vector<int>& ds) {
    // Odometer over anchor coordinates (doubled units, step 2).
    int d = b.d();
    std::vector<int> a(b.lo);
    std::vector<int> max(d);
    for (int j = 0; j < d; ++j) {
      bool span = std::binary_search(ds.begin(), ds.end(), j + 1);
      max[j] = span ? b.hi[j] - 2 : b.hi[j];
      if (max[j] < b.lo[j]) return;  // no room in this direction
    }
    while (true) {
      Cell c{a, ds};
      if (k != i || b.conv == Convention::Closed || cell_meets_interior(c, b))
        out.push_back(std::move(c));
      int j = 0;
      for (; j < d; ++j) {
        if (a[j] + 2 <= max[j]) {
          a[j] += 2;
          break;
        }
        a[j] = b.lo[j];
      }
      if (j == d) break;
    }
  });
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Cell> boundary_shell(const Box& b, int k) {
  std::vector<Cell> out;
  for (Cell& c : enumerate_cells(b, k, -1)) {
    bool on_boundary = false;
    for (int j = 1; j <= b.d() && !on_boundary; ++j) {
      if (b.lo[j - 1] == b.hi[j - 1] || c.spans(j)) continue;
      int a = c.anchor[j - 1];
      if (a == b.lo[j - 1] || a == b.hi[j - 1]) on_boundary = true;
    }
    if (on_boundary) out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::pair<Cell, int>> cell_boundary(const Cell& c) {
  std::vector<std::pair<Cell, int>> out;
  out.reserve(2 * c.dim());
  for (size_t idx = 0; idx < c.dirs.size(); ++idx) {
    int dir = c.dirs[idx];
    int sign = (idx % 2 == 0) ? 1 : -1;  // (-1)^{position}
    Cell face;
    face.anchor = c.anchor;
    face.dirs.reserve(c.dirs.size() - 1);
    for (int j : c.dirs)
      if (j != dir) face.dirs.push_back(j);
    Cell upper = face;
    upper.anchor[dir - 1] += 2;
    out.emplace_back(std::move(upper), sign);
    out.emplace_back(std::move(face), -sign);
  }
  return out;
}

Cell dual_cell(const Cell& c) {
  Cell out;
  out.anchor = c.anchor;
  for (int j = 1; j <= c.d(); ++j)
    out.anchor[j - 1] += c.spans(j) ? 1 : -1;
  for (int j = 1; j <= c.d(); ++j)
    if (!c.spans(j)) out.dirs.push_back(j);
  return out;
}

Box dual_box(const Box& b) {
  validate_box(b);
  Box out;
  out.lo = b.lo;
  out.hi = b.hi;
  if (b.conv == Convention::Open) {
    for (size_t j = 0; j < out.lo.size(); ++j) {
      out.lo[j] += 1;
      out.hi[j] -= 1;
      if (out.lo[j] > out.hi[j])
        throw std::invalid_argument(
            "dual_box: degenerate direction in an Open box has no dual");
    }
    out.conv = Convention::Closed;
  } else {
    for (size_t j = 0; j < out.lo.size(); ++j) {
      out.lo[j] -= 1;
      out.hi[j] += 1;
    }
    out.conv = Convention::Open;
  }
  return out;
}

std::string format_cell(const Cell& c) {
  std::ostringstream os;
  os << "anchor=(";
  for (int j = 0; j < c.d(); ++j) {
    if (j) os << ",";
    os << c.anchor[j];
  }
  os << ");dirs={";
  for (size_t j = 0; j < c.dirs.size(); ++j) {
    if (j) os << ",";
    os << c.dirs[j];
  }
  os << "}";
  return os.str();
}

namespace {

std::vector<int> parse_int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  if (s.empty()) return out;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t comma = s.find(',', pos);
    std::string tok = s.substr(pos, comma == std::string::npos
                                        ? std::string::npos
                                        : comma - pos);
    try {
      size_t used = 0;
      int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("parse_cell: bad ") + what +
                                  " entry '" + tok + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

Cell parse_cell(const std::string& input) {
  std::string s;
  for (char c : input)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  const std::string p1 = "anchor=(", p2 = ");dirs={";
  auto a0 = s.find(p1);
  auto a1 = s.find(p2);
  if (a0 != 0 || a1 == std::string::npos || s.back() != '}')
    throw std::invalid_argument("parse_cell: expected "
                                "'anchor=(...);dirs={...}', got '" +
                                input + "'");
  Cell c;
  c.anchor = parse_int_list(s.substr(p1.size(), a1 - p1.size()), "anchor");
  c.dirs = parse_int_list(
      s.substr(a1 + p2.size(), s.size() - 1 - (a1 + p2.size())), "dirs");
  validate_cell(c);
  return c;
}

CellIndex::CellIndex(std::vector<Cell> cs) : cells(std::move(cs)) {
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  for (size_t k = 0; k < cells.size(); ++k)
    pos.emplace(cells[k], static_cast<int>(k));
}

int CellIndex::find(const Cell& c) const {
  auto it = pos.find(c);
  return it == pos.end() ? -1 : it->second;
}

CellComplex box_complex(const Box& b, int top, int i) {
  CellComplex out;
  out.d = b.d();
  for (int k = 0; k <= top; ++k)
    out.dims.emplace_back(enumerate_cells(b, k, i));
  return out;
}

CellComplex complex_from_cells(int d, const std::vector<Cell>& cells) {
  int top = -1;
  for (const Cell& c : cells) {
    validate_cell(c);
    if (c.d() != d) throw std::invalid_argument("complex: mixed dimensions");
    top = std::max(top, c.dim());
  }
  std::vector<std::vector<Cell>> bydim(top + 1);
  for (const Cell& c : cells) bydim[c.dim()].push_back(c);
  CellComplex out;
  out.d = d;
  for (auto& v : bydim) out.dims.emplace_back(std::move(v));
  return out;
}

CellComplex complex_closure(int d, const std::vector<Cell>& cells) {
  std::set<Cell> seen(cells.begin(), cells.end());
  std::vector<Cell> work(cells.begin(), cells.end());
  while (!work.empty()) {
    Cell c = std::move(work.back());
    work.pop_back();
    for (auto& [face, sign] : cell_boundary(c)) {
      (void)sign;
      if (seen.insert(face).second) work.push_back(face);
    }
  }
  return complex_from_cells(d, {seen.begin(), seen.end()});
}

CellComplex complex_union(const CellComplex& a, const CellComplex& b) {
  if (a.d != b.d && a.max_dim() >= 0 && b.max_dim() >= 0)
    throw std::invalid_argument("complex_union: mixed ambient dimension");
  CellComplex out;
  out.d = a.max_dim() >= 0 ? a.d : b.d;
  int top = std::max(a.max_dim(), b.max_dim());
  for (int k = 0; k <= top; ++k) {
    std::vector<Cell> cells;
    if (k <= a.max_dim())
      cells.insert(cells.end(), a.at(k).cells.begin(), a.at(k).cells.end());
    if (k <= b.max_dim())
      cells.insert(cells.end(), b.at(k).cells.begin(), b.at(k).cells.end());
    out.dims.emplace_back(std::move(cells));
  }
  return out;
}

}  // namespace prcm
