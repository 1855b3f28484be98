#include "prcm/measure.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

#include "prcm/rng.hpp"

namespace prcm {

namespace {

int env_threads() {
  const char* s = std::getenv("PRCM_THREADS");
  if (!s) return 1;
  int t = std::atoi(s);
  return std::clamp(t, 1, 64);
}

// Closed box `pad` lattice steps out from b. Below dimension i the pad-0
// window complex coincides with b's own skeleton for either convention.
Box window_box(const Box& b, int pad) {
  Box w = b;
  for (int j = 0; j < w.d(); ++j) {
    w.lo[j] -= 2 * pad;
    w.hi[j] += 2 * pad;
  }
  w.conv = Convention::Closed;
  return w;
}

Int divide_exact(const Int& num, const Int& den, const char* what) {
  if (den == 0 || !mpz_divisible_p(num.get_mpz_t(), den.get_mpz_t()))
    throw std::logic_error(std::string("inexact division in ") + what);
  Int r;
  mpz_divexact(r.get_mpz_t(), num.get_mpz_t(), den.get_mpz_t());
  return r;
}

std::vector<Cell> sorted_cells(std::vector<Cell> cs) {
  std::sort(cs.begin(), cs.end());
  cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
  return cs;
}

// |ker d_{k}| of the complex, with the zero-row map short-circuited: a Howell
// form over thousands of all-free columns would cost cubic time for a count
// that is just q^cols.
Int chain_kernel_size(const CellComplex& K, int k, int64_t q) {
  IntMatrix dk = boundary_matrix(K, k);
  if (dk.rows == 0) return int_pow(q, dk.cols);
  return kernel_mod(ModMatrix::from_int(dk, q)).kernel_size;
}

// Kernel basis rows of d_k over K, re-indexed into the columns of `target`
// (the k-cells of a larger complex). Every k-cell of K must appear there.
std::vector<std::vector<int64_t>> embedded_cycle_rows(const CellComplex& K,
                                                      int k, int64_t q,
                                                      const CellIndex& target) {
  std::vector<std::vector<int64_t>> out;
  int nk = K.ncells(k);
  if (nk == 0) return out;
  std::vector<int> where(nk);
  for (int j = 0; j < nk; ++j) {
    where[j] = target.find(K.at(k).cells[j]);
    if (where[j] < 0) throw std::logic_error("cycle cell missing from ambient");
  }
  IntMatrix dk = boundary_matrix(K, k);
  if (dk.rows == 0) {
    for (int j = 0; j < nk; ++j) {
      std::vector<int64_t> row(target.size(), 0);
      row[where[j]] = q == 1 ? 0 : 1;
      out.push_back(std::move(row));
    }
    return out;
  }
  HowellForm kern = kernel_mod(ModMatrix::from_int(dk, q)).kernel;
  for (const auto& krow : kern.rows) {
    std::vector<int64_t> row(target.size(), 0);
    for (int j = 0; j < nk; ++j) row[where[j]] = krow[j];
    out.push_back(std::move(row));
  }
  return out;
}

// Shared engine assembly once the ambient complex, the open boundary cells,
// and any extra base generator rows are known.
ClusterEngine build_engine(const Context& ctx, CellComplex ambient,
                           const std::vector<Cell>& open_bc_cells,
                           const std::vector<std::vector<int64_t>>& extra_rows,
                           bool induced_style, int pad) {
  ClusterEngine eng;
  eng.ctx = ctx;
  eng.candidates = candidate_plaquettes(ctx);
  eng.ambient = std::move(ambient);
  eng.induced_style = induced_style;
  eng.pad = pad;

  const int k = ctx.i - 1;
  const int cols = eng.ambient.ncells(k);
  std::vector<std::vector<int64_t>> gens;
  gens.reserve(open_bc_cells.size() + extra_rows.size());
  for (const Cell& c : open_bc_cells)
    gens.push_back(boundary_column_mod(eng.ambient, c, ctx.q));
  for (const auto& r : extra_rows) gens.push_back(r);
  ModMatrix gm(ctx.q, static_cast<int>(gens.size()), cols);
  for (int r = 0; r < gm.rows; ++r)
    for (int c = 0; c < cols; ++c) gm.set(r, c, gens[r][c]);
  eng.base = howell_form(gm);

  eng.skeleton_kernel = chain_kernel_size(eng.ambient, k, ctx.q);

  eng.cols.reserve(eng.candidates.size());
  for (const Cell& c : eng.candidates)
    eng.cols.push_back(boundary_column_mod(eng.ambient, c, ctx.q));

  if (induced_style) {
    CellComplex kbox = box_complex(ctx.box, k, -1);
    eng.box_cycles = embedded_cycle_rows(kbox, k, ctx.q, eng.ambient.at(k));
  }
  return eng;
}

HowellForm mask_span_form(const ClusterEngine& eng, uint64_t mask) {
  std::vector<std::vector<int64_t>> sel;
  for (int j = 0; j < eng.n(); ++j)
    if (mask >> j & 1) sel.push_back(eng.cols[j]);
  return howell_extend(eng.base, sel);
}

// Plaquette boundary conditions with the skeleton truncated `pad` steps out.
// The extra skeleton only rescales |Z_{i-1}|, which the induced style never
// sees, so every pad gives the identical table; pad 0 is the certified one.
ClusterEngine plaquettes_padded_engine(const Context& ctx, int pad) {
  CellComplex amb = box_complex(window_box(ctx.box, pad), ctx.i - 1, -1);
  if (!ctx.bc.cells.empty())
    amb = complex_union(amb, complex_closure(ctx.d, ctx.bc.cells));
  return build_engine(ctx, std::move(amb), ctx.bc.cells, {}, true, pad);
}

std::optional<long> q_power_exponent(const Int& num, const Int& den,
                                     int64_t q) {
  Rat r = make_rat(num, den);
  Int a = r.get_num(), b = r.get_den();
  auto pow_of = [q](Int x) -> std::optional<long> {
    long e = 0;
    while (x > 1) {
      if (q <= 1 || !mpz_divisible_ui_p(x.get_mpz_t(), (unsigned long)q))
        return std::nullopt;
      mpz_divexact_ui(x.get_mpz_t(), x.get_mpz_t(), (unsigned long)q);
      ++e;
    }
    return e;
  };
  if (b == 1) return pow_of(a);
  if (a == 1) {
    auto e = pow_of(b);
    if (!e) return std::nullopt;
    return -*e;
  }
  return std::nullopt;
}

bool is_candidate(const Context& ctx, const Cell& c) {
  if (!cell_in_box(c, ctx.box)) return false;
  if (ctx.box.conv == Convention::Open) return cell_meets_interior(c, ctx.box);
  return true;
}

}  // namespace

std::string bc_name(const BoundaryCondition& bc) {
  switch (bc.kind) {
    case BoundaryCondition::Kind::Free:
      return "free";
    case BoundaryCondition::Kind::Wired:
      return "wired";
    case BoundaryCondition::Kind::Plaquettes:
      return "plaquettes";
    case BoundaryCondition::Kind::WiredAtInfinity:
      return "wired-at-infinity";
  }
  return "?";
}

void validate_context(const Context& ctx) {
  if (ctx.d < 1) throw std::invalid_argument("dimension must be >= 1");
  if (ctx.box.d() != ctx.d)
    throw std::invalid_argument("box dimension does not match context");
  validate_box(ctx.box);
  if (ctx.i < 1 || ctx.i > ctx.d)
    throw std::invalid_argument("model dimension i must satisfy 1 <= i <= d");
  if (ctx.q < 1) throw std::invalid_argument("q must be >= 1");
  if (ctx.q > (int64_t{1} << 20))
    throw std::invalid_argument("q above 2^20 is not supported");
  if (ctx.p < 0 || ctx.p > 1)
    throw std::invalid_argument("p must lie in [0,1]");

  using Kind = BoundaryCondition::Kind;
  if (ctx.bc.kind == Kind::Free || ctx.bc.kind == Kind::Wired) {
    if (!ctx.bc.cells.empty())
      throw std::invalid_argument(bc_name(ctx.bc) +
                                  " boundary condition carries no cells");
    return;
  }
  std::set<Cell> seen;
  for (const Cell& c : ctx.bc.cells) {
    validate_cell(c);
    if (c.d() != ctx.d)
      throw std::invalid_argument("bc cell dimension mismatch");
    if (static_cast<int>(c.dirs.size()) != ctx.i)
      throw std::invalid_argument("bc cells must be i-cells");
    if ((c.anchor[0] & 1) != (ctx.box.lo[0] & 1))
      throw std::invalid_argument("bc cell lies on the other lattice");
    if (is_candidate(ctx, c))
      throw std::invalid_argument("bc cell " + format_cell(c) +
                                  " is not exterior to the box");
    if (!seen.insert(c).second)
      throw std::invalid_argument("duplicate bc cell " + format_cell(c));
  }
}

std::vector<Cell> candidate_plaquettes(const Context& ctx) {
  std::vector<Cell> cs = enumerate_cells(ctx.box, ctx.i, ctx.i);
  std::sort(cs.begin(), cs.end());
  return cs;
}

Rat dual_parameter(const Rat& p, int64_t q) {
  Rat num = (1 - p) * Rat(q);
  Rat den = num + p;
  if (den == 0) throw std::invalid_argument("dual parameter undefined");
  Rat r = num / den;
  r.canonicalize();
  return r;
}

Rat self_dual_p(int64_t q) {
  if (q < 1) throw std::invalid_argument("q must be >= 1");
  Int s;
  mpz_sqrt(s.get_mpz_t(), Int(q).get_mpz_t());
  if (s * s == q) return make_rat(s, s + 1);
  // sqrt(q) to twelve digits; the fixed point itself is irrational.
  Int scale = int_pow(Int(10), 12);
  Int r;
  mpz_sqrt(r.get_mpz_t(), Int(q * scale * scale).get_mpz_t());
  return make_rat(r, r + scale);
}

Context dual_context(const Context& ctx) {
  validate_context(ctx);
  if (ctx.i >= ctx.d)
    throw std::invalid_argument("dual context needs i <= d-1");
  Context out;
  out.d = ctx.d;
  out.i = ctx.d - ctx.i;
  out.q = ctx.q;
  out.p = dual_parameter(ctx.p, ctx.q);
  out.box = dual_box(ctx.box);
  using Kind = BoundaryCondition::Kind;
  std::vector<Cell> dual_cells;
  dual_cells.reserve(ctx.bc.cells.size());
  for (const Cell& c : ctx.bc.cells) dual_cells.push_back(dual_cell(c));
  dual_cells = sorted_cells(std::move(dual_cells));
  switch (ctx.bc.kind) {
    case Kind::Free:
      out.bc = BoundaryCondition::wired();
      break;
    case Kind::Wired:
      out.bc = BoundaryCondition::free_bc();
      break;
    case Kind::Plaquettes:
      out.bc = BoundaryCondition::wired_at_infinity(std::move(dual_cells));
      break;
    case Kind::WiredAtInfinity:
      out.bc = BoundaryCondition::plaquettes(std::move(dual_cells));
      break;
  }
  validate_context(out);
  return out;
}

uint64_t dual_mask(const std::vector<Cell>& primal_candidates,
                   const std::vector<Cell>& dual_candidates, uint64_t mask) {
  if (primal_candidates.size() != dual_candidates.size())
    throw std::logic_error("candidate lists are not dual bijective");
  std::map<Cell, int> pos;
  for (size_t j = 0; j < dual_candidates.size(); ++j)
    pos[dual_candidates[j]] = static_cast<int>(j);
  uint64_t out = 0;
  for (size_t j = 0; j < primal_candidates.size(); ++j) {
    auto it = pos.find(dual_cell(primal_candidates[j]));
    if (it == pos.end())
      throw std::logic_error("candidate lists are not dual bijective");
    if (!(mask >> j & 1)) out |= uint64_t{1} << it->second;
  }
  return out;
}

Int ClusterEngine::boundary_span(uint64_t mask) const {
  return mask_span_form(*this, mask).span_size();
}

Int ClusterEngine::cluster_direct(uint64_t mask) const {
  return divide_exact(skeleton_kernel, boundary_span(mask), "cluster_direct");
}

Int ClusterEngine::cluster_induced(uint64_t mask) const {
  HowellForm b = mask_span_form(*this, mask);
  Int denom = b.span_size();
  Int numer = howell_extend(b, box_cycles).span_size();
  return divide_exact(numer, denom, "cluster_induced");
}

Int ClusterEngine::cluster_term(uint64_t mask) const {
  return induced_style ? cluster_induced(mask) : cluster_direct(mask);
}

Rat ClusterEngine::weight(uint64_t mask) const {
  unsigned long k = std::popcount(mask);
  Rat w = rat_pow(ctx.p, k) * rat_pow(1 - ctx.p, n() - k);
  return w * Rat(cluster_term(mask));
}

Int ClusterEngine::weight_int(uint64_t mask) const {
  unsigned long k = std::popcount(mask);
  Int a = ctx.p.get_num(), b = ctx.p.get_den();
  return int_pow(a, k) * int_pow(b - a, n() - k) * cluster_term(mask);
}

ClusterEngine make_window_engine(const Context& ctx, int pad,
                                 WindowFlavor flavor) {
  validate_context(ctx);
  if (ctx.bc.kind != BoundaryCondition::Kind::WiredAtInfinity)
    throw std::invalid_argument(
        "window engines model wired-at-infinity conditions");
  if (pad < 0) throw std::invalid_argument("pad must be >= 0");
  Box w = window_box(ctx.box, pad);
  for (const Cell& c : ctx.bc.cells)
    if (!cell_in_box(c, w))
      throw std::invalid_argument("exception cell outside the pad-" +
                                  std::to_string(pad) + " window");

  std::vector<Cell> cands = candidate_plaquettes(ctx);
  std::set<Cell> skip(cands.begin(), cands.end());
  skip.insert(ctx.bc.cells.begin(), ctx.bc.cells.end());
  std::vector<Cell> open_exterior;
  for (const Cell& c : enumerate_cells(w, ctx.i, -1))
    if (!skip.contains(c)) open_exterior.push_back(c);

  CellComplex amb = box_complex(w, ctx.i - 1, -1);
  std::vector<std::vector<int64_t>> extra;
  if (flavor == WindowFlavor::WiredWindow) {
    // Cone over the window boundary: every (i-1)-cycle supported on the
    // shell becomes a relation.
    CellComplex shell =
        complex_closure(ctx.d, boundary_shell(w, ctx.i - 1));
    extra = embedded_cycle_rows(shell, ctx.i - 1, ctx.q, amb.at(ctx.i - 1));
  }
  return build_engine(ctx, std::move(amb), open_exterior, extra, true, pad);
}

namespace {

constexpr int kWindowPadCap = 4;

int minimal_pad(const Context& ctx) {
  for (int pad = 0; pad <= kWindowPadCap; ++pad) {
    bool ok = true;
    Box w = window_box(ctx.box, pad);
    for (const Cell& c : ctx.bc.cells)
      if (!cell_in_box(c, w)) ok = false;
    if (ok) return pad;
  }
  throw std::invalid_argument("exception cells too far outside the box");
}

// Certified wired-at-infinity engine: the wired-flavor table must agree with
// both the next pad and the free flavor at the same pad. Equal sandwich ends
// pin the infinite-volume limit.
ClusterEngine certified_infinity_engine(const Context& ctx,
                                        StabilizationCertificate* cert,
                                        int pad_cap, int cap) {
  int start = minimal_pad(ctx);
  for (int pad = start; pad <= pad_cap; ++pad) {
    ClusterEngine wired = make_window_engine(ctx, pad, WindowFlavor::WiredWindow);
    MeasureTable tw = table_from_engine(wired, cap);
    MeasureTable tn = table_from_engine(
        make_window_engine(ctx, pad + 1, WindowFlavor::WiredWindow), cap);
    if (!same_measure(tw, tn)) continue;
    MeasureTable tf = table_from_engine(
        make_window_engine(ctx, pad, WindowFlavor::FreeWindow), cap);
    if (!same_measure(tw, tf)) continue;
    if (cert) {
      cert->pad = pad;
      cert->at_pad = std::move(tw);
      cert->at_next = std::move(tn);
    }
    return wired;
  }
  throw std::runtime_error(
      "wired-at-infinity truncation did not stabilize by pad " +
      std::to_string(pad_cap));
}

}  // namespace

ClusterEngine make_engine(const Context& ctx) {
  validate_context(ctx);
  using Kind = BoundaryCondition::Kind;
  switch (ctx.bc.kind) {
    case Kind::Free:
      return build_engine(ctx, box_complex(ctx.box, ctx.i - 1, -1), {}, {},
                          false, 0);
    case Kind::Wired:
      return build_engine(ctx, box_complex(ctx.box, ctx.i - 1, -1),
                          boundary_shell(ctx.box, ctx.i), {}, false, 0);
    case Kind::Plaquettes:
      return plaquettes_padded_engine(ctx, 0);
    case Kind::WiredAtInfinity:
      return certified_infinity_engine(ctx, nullptr, kWindowPadCap, 20);
  }
  throw std::logic_error("unknown boundary condition");
}

MeasureTable table_from_engine(const ClusterEngine& eng, int cap) {
  int n = eng.n();
  if (n > cap)
    throw std::invalid_argument(
        "refusing to enumerate 2^" + std::to_string(n) +
        " configurations (cap " + std::to_string(cap) + " candidates)");
  MeasureTable tab;
  tab.ctx = eng.ctx;
  tab.candidates = eng.candidates;
  tab.pad = eng.pad;
  uint64_t total_configs = uint64_t{1} << n;
  tab.weights.resize(total_configs);

  int threads = env_threads();
  if (threads > 1 && n >= 14) {
    std::vector<std::thread> pool;
    uint64_t chunk = (total_configs + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      uint64_t lo = t * chunk, hi = std::min(total_configs, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&eng, &tab, lo, hi] {
        for (uint64_t m = lo; m < hi; ++m) tab.weights[m] = eng.weight_int(m);
      });
    }
    for (auto& th : pool) th.join();
  } else {
    for (uint64_t m = 0; m < total_configs; ++m)
      tab.weights[m] = eng.weight_int(m);
  }

  for (const Int& w : tab.weights) tab.total += w;
  Int b = eng.ctx.p.get_den(), a = eng.ctx.p.get_num();
  tab.Z = make_rat(tab.total, int_pow(b, n));
  tab.Y = a == b ? Rat(0) : make_rat(tab.total, int_pow(b - a, n));
  return tab;
}

MeasureTable enumerate_measure(const Context& ctx, int cap) {
  return table_from_engine(make_engine(ctx), cap);
}

MeasureTable enumerate_conditional(const Context& ctx,
                                   const std::vector<Cell>& pinned_open,
                                   const std::vector<Cell>& pinned_closed,
                                   int cap) {
  ClusterEngine eng = make_engine(ctx);
  std::map<Cell, int> pos;
  for (int j = 0; j < eng.n(); ++j) pos[eng.candidates[j]] = j;
  uint64_t open_mask = 0, pinned = 0;
  auto pin = [&](const std::vector<Cell>& cells, bool open) {
    for (const Cell& c : cells) {
      auto it = pos.find(c);
      if (it == pos.end())
        throw std::invalid_argument("pinned cell " + format_cell(c) +
                                    " is not a candidate");
      uint64_t bit = uint64_t{1} << it->second;
      if (pinned & bit)
        throw std::invalid_argument("cell " + format_cell(c) +
                                    " pinned twice");
      pinned |= bit;
      if (open) open_mask |= bit;
    }
  };
  pin(pinned_open, true);
  pin(pinned_closed, false);

  std::vector<Cell> free_cells;
  std::vector<int> free_pos;
  for (int j = 0; j < eng.n(); ++j)
    if (!(pinned >> j & 1)) {
      free_cells.push_back(eng.candidates[j]);
      free_pos.push_back(j);
    }
  int nf = static_cast<int>(free_cells.size());
  if (nf > cap)
    throw std::invalid_argument("refusing to enumerate 2^" +
                                std::to_string(nf) +
                                " conditional configurations (cap " +
                                std::to_string(cap) + ")");
  MeasureTable tab;
  tab.ctx = ctx;
  tab.candidates = free_cells;
  tab.pad = eng.pad;
  tab.weights.resize(uint64_t{1} << nf);
  for (uint64_t sub = 0; sub < tab.weights.size(); ++sub) {
    uint64_t full = open_mask;
    for (int j = 0; j < nf; ++j)
      if (sub >> j & 1) full |= uint64_t{1} << free_pos[j];
    tab.weights[sub] = eng.weight_int(full);
    tab.total += tab.weights[sub];
  }
  // Pinned cells contribute a constant p-power, so Z and Y are normalized by
  // the full candidate count.
  Int b = ctx.p.get_den(), a = ctx.p.get_num();
  tab.Z = make_rat(tab.total, int_pow(b, eng.n()));
  tab.Y = a == b ? Rat(0) : make_rat(tab.total, int_pow(b - a, eng.n()));
  return tab;
}

Rat MeasureTable::prob(uint64_t mask) const {
  if (total == 0) throw std::logic_error("empty measure table");
  return make_rat(weights.at(mask), total);
}

bool same_measure(const MeasureTable& a, const MeasureTable& b) {
  if (a.weights.size() != b.weights.size())
    throw std::invalid_argument("tables have different candidate counts");
  for (size_t m = 0; m < a.weights.size(); ++m)
    if (a.weights[m] * b.total != b.weights[m] * a.total) return false;
  return true;
}

StabilizationCertificate stabilize_truncation(const Context& ctx, int pad_cap,
                                              int cap) {
  validate_context(ctx);
  using Kind = BoundaryCondition::Kind;
  StabilizationCertificate cert;
  switch (ctx.bc.kind) {
    case Kind::Free:
    case Kind::Wired: {
      cert.pad = 0;
      cert.at_pad = enumerate_measure(ctx, cap);
      cert.at_next = cert.at_pad;
      return cert;
    }
    case Kind::Plaquettes: {
      for (int pad = 0; pad < pad_cap; ++pad) {
        MeasureTable t0 =
            table_from_engine(plaquettes_padded_engine(ctx, pad), cap);
        MeasureTable t1 =
            table_from_engine(plaquettes_padded_engine(ctx, pad + 1), cap);
        if (same_measure(t0, t1)) {
          cert.pad = pad;
          cert.at_pad = std::move(t0);
          cert.at_next = std::move(t1);
          return cert;
        }
      }
      throw std::runtime_error("plaquette truncation did not stabilize");
    }
    case Kind::WiredAtInfinity: {
      certified_infinity_engine(ctx, &cert, pad_cap, cap);
      return cert;
    }
  }
  throw std::logic_error("unknown boundary condition");
}

Rat plaquette_marginal(const MeasureTable& tab, const Cell& sigma) {
  int j = -1;
  for (int k = 0; k < tab.n(); ++k)
    if (tab.candidates[k] == sigma) j = k;
  if (j < 0)
    throw std::invalid_argument("cell " + format_cell(sigma) +
                                " is not a candidate");
  Int open = 0;
  for (uint64_t m = 0; m < tab.weights.size(); ++m)
    if (m >> j & 1) open += tab.weights[m];
  return make_rat(open, tab.total);
}

bool gamma_null_in(const ClusterEngine& eng,
                   const std::vector<std::pair<Cell, int>>& gamma,
                   uint64_t mask) {
  const CellIndex& idx = eng.ambient.at(eng.ctx.i - 1);
  std::vector<int64_t> v(idx.size(), 0);
  for (const auto& [c, coef] : gamma) {
    int pos = idx.find(c);
    if (pos < 0)
      throw std::invalid_argument("gamma cell " + format_cell(c) +
                                  " outside the ambient complex");
    v[pos] = ((v[pos] + coef) % eng.ctx.q + eng.ctx.q) % eng.ctx.q;
  }
  return howell_member(mask_span_form(eng, mask), v);
}

Rat null_homology_probability(const Context& ctx,
                              const std::vector<std::pair<Cell, int>>& gamma,
                              int cap) {
  ClusterEngine eng = make_engine(ctx);
  for (const auto& [c, coef] : gamma) {
    validate_cell(c);
    (void)coef;
    if (static_cast<int>(c.dirs.size()) != ctx.i - 1)
      throw std::invalid_argument("gamma must consist of (i-1)-cells");
  }
  if (ctx.i >= 2) {
    std::map<Cell, int64_t> acc;
    for (const auto& [c, coef] : gamma)
      for (const auto& [f, s] : cell_boundary(c)) acc[f] += int64_t(coef) * s;
    for (const auto& [f, v] : acc)
      if (v % ctx.q != 0)
        throw std::invalid_argument("gamma is not a cycle mod q");
  }
  MeasureTable tab = table_from_engine(eng, cap);
  Int hit = 0;
  for (uint64_t m = 0; m < tab.weights.size(); ++m)
    if (gamma_null_in(eng, gamma, m)) hit += tab.weights[m];
  return make_rat(hit, tab.total);
}

std::optional<PairWitness> fkg_violation(const MeasureTable& tab) {
  uint64_t nconf = tab.weights.size();
  for (uint64_t a = 0; a < nconf; ++a)
    for (uint64_t b = 0; b <= a; ++b) {
      if (tab.weights[a | b] * tab.weights[a & b] <
          tab.weights[a] * tab.weights[b])
        return PairWitness{a, b};
    }
  return std::nullopt;
}

std::optional<PairWitness> holley_violation(const MeasureTable& hi,
                                            const MeasureTable& lo) {
  if (hi.weights.size() != lo.weights.size())
    throw std::invalid_argument("tables have different candidate counts");
  uint64_t nconf = hi.weights.size();
  for (uint64_t a = 0; a < nconf; ++a)
    for (uint64_t b = 0; b < nconf; ++b) {
      if (hi.weights[a | b] * lo.weights[a & b] <
          hi.weights[a] * lo.weights[b])
        return PairWitness{a, b};
    }
  return std::nullopt;
}

DualityReport verify_duality(const Context& ctx, int cap) {
  MeasureTable t = enumerate_measure(ctx, cap);
  MeasureTable td = enumerate_measure(dual_context(ctx), cap);
  if (t.n() != td.n())
    throw std::logic_error("candidate count mismatch under duality");
  DualityReport rep;
  rep.configs = static_cast<int>(t.weights.size());
  for (uint64_t m = 0; m < t.weights.size(); ++m) {
    uint64_t dm = dual_mask(t.candidates, td.candidates, m);
    Rat diff = t.prob(m) - td.prob(dm);
    if (diff < 0) diff = -diff;
    if (diff > rep.max_discrepancy) {
      rep.max_discrepancy = diff;
      rep.witness = m;
    }
  }
  rep.ok = rep.max_discrepancy == 0;
  return rep;
}

DualityReport verify_duality_sampled(const Context& ctx, int samples,
                                     uint64_t seed) {
  ClusterEngine e = make_engine(ctx);
  ClusterEngine ed = make_engine(dual_context(ctx));
  if (e.n() != ed.n())
    throw std::logic_error("candidate count mismatch under duality");
  if (e.n() > 62) throw std::invalid_argument("too many candidates to mask");
  uint64_t all = (uint64_t{1} << e.n()) - 1;
  uint64_t dm0 = dual_mask(e.candidates, ed.candidates, 0);
  Int w0 = e.weight_int(0), wd0 = ed.weight_int(dm0);
  DualityReport rep;
  Rng rng(seed);
  for (int s = 0; s < samples; ++s) {
    uint64_t m = rng.u64() & all;
    uint64_t dm = dual_mask(e.candidates, ed.candidates, m);
    Int lhs = e.weight_int(m) * wd0;
    Int rhs = w0 * ed.weight_int(dm);
    ++rep.configs;
    if (lhs != rhs) {
      rep.ok = false;
      rep.witness = m;
      Rat diff = make_rat(lhs, w0 * wd0) - make_rat(rhs, w0 * wd0);
      if (diff < 0) diff = -diff;
      if (diff > rep.max_discrepancy) rep.max_discrepancy = diff;
    }
  }
  return rep;
}

EpReport verify_ep(const Context& ctx, int samples, uint64_t seed) {
  Context pctx = ctx;
  pctx.bc = BoundaryCondition::free_bc();
  validate_context(pctx);
  ClusterEngine ep = make_engine(pctx);
  ClusterEngine ed = make_engine(dual_context(pctx));
  if (ep.n() != ed.n() || ep.n() > 62)
    throw std::logic_error("bad candidate lists for the duality exponent");
  uint64_t all = (uint64_t{1} << ep.n()) - 1;
  Int qI(pctx.q);

  auto num_den = [&](uint64_t m) {
    uint64_t dm = dual_mask(ep.candidates, ed.candidates, m);
    return std::pair<Int, Int>(
        ep.cluster_term(m) * int_pow(qI, std::popcount(m)),
        ed.cluster_term(dm));
  };
  auto [n0, d0] = num_den(0);
  EpReport rep;
  auto e0 = q_power_exponent(n0, d0, pctx.q);
  if (!e0) {
    rep.ok = false;
    return rep;
  }
  rep.c = *e0;

  bool exhaustive = ep.n() <= 20 && (uint64_t{1} << ep.n()) <= uint64_t(samples);
  Rng rng(seed);
  uint64_t count = exhaustive ? (uint64_t{1} << ep.n()) : uint64_t(samples);
  for (uint64_t s = 0; s < count; ++s) {
    uint64_t m = exhaustive ? s : (rng.u64() & all);
    auto [nm, dm] = num_den(m);
    ++rep.configs;
    if (nm * d0 != n0 * dm) {
      rep.ok = false;
      rep.witness = m;
      return rep;
    }
  }
  return rep;
}

ConditioningReport verify_conditioning(const Context& outer, const Box& inner,
                                       uint64_t pinned_mask, int cap) {
  validate_context(outer);
  Context ictx = outer;
  ictx.box = inner;
  ictx.bc = BoundaryCondition::free_bc();
  validate_context(ictx);

  std::vector<Cell> outer_cands = candidate_plaquettes(outer);
  std::vector<Cell> inner_cands = candidate_plaquettes(ictx);
  std::set<Cell> inner_set(inner_cands.begin(), inner_cands.end());
  std::vector<Cell> exterior;
  for (const Cell& c : outer_cands)
    if (!inner_set.contains(c)) exterior.push_back(c);
  for (const Cell& c : inner_cands)
    if (std::find(outer_cands.begin(), outer_cands.end(), c) ==
        outer_cands.end())
      throw std::invalid_argument("inner candidates must embed in the outer box");
  if (exterior.size() > 62 ||
      (exterior.size() < 62 && pinned_mask >> exterior.size()))
    throw std::invalid_argument("pinned mask has bits beyond the exterior cells");

  std::vector<Cell> open_cells, closed_cells;
  for (size_t j = 0; j < exterior.size(); ++j)
    (pinned_mask >> j & 1 ? open_cells : closed_cells).push_back(exterior[j]);

  MeasureTable cond =
      enumerate_conditional(outer, open_cells, closed_cells, cap);
  if (cond.candidates != inner_cands)
    throw std::logic_error("conditional candidates do not match the inner box");

  using Kind = BoundaryCondition::Kind;
  ConditioningReport rep;
  bool wired_branch = outer.bc.kind == Kind::Wired ||
                      outer.bc.kind == Kind::WiredAtInfinity;
  std::vector<Cell> bc_cells;
  if (wired_branch) {
    bc_cells = closed_cells;
    bc_cells.insert(bc_cells.end(), outer.bc.cells.begin(),
                    outer.bc.cells.end());
    ictx.bc = BoundaryCondition::wired_at_infinity(sorted_cells(bc_cells));
    rep.detail = "wired branch: inner wired-at-infinity with " +
                 std::to_string(ictx.bc.cells.size()) + " closed exceptions";
  } else {
    bc_cells = open_cells;
    bc_cells.insert(bc_cells.end(), outer.bc.cells.begin(),
                    outer.bc.cells.end());
    ictx.bc = BoundaryCondition::plaquettes(sorted_cells(bc_cells));
    rep.detail = "plain branch: inner plaquette condition with " +
                 std::to_string(ictx.bc.cells.size()) + " open cells";
  }
  MeasureTable direct = enumerate_measure(ictx, cap);
  for (uint64_t m = 0; m < cond.weights.size(); ++m)
    if (cond.weights[m] * direct.total != direct.weights[m] * cond.total) {
      rep.ok = false;
      rep.witness = m;
      return rep;
    }
  return rep;
}

Pressure pressure(const Context& ctx, int cap) {
  validate_context(ctx);
  if (ctx.p <= 0 || ctx.p >= 1)
    throw std::invalid_argument("pressure needs 0 < p < 1");
  ClusterEngine eng = make_engine(ctx);
  int n = eng.n();
  if (n > cap)
    throw std::invalid_argument("refusing to enumerate 2^" +
                                std::to_string(n) + " configurations (cap " +
                                std::to_string(cap) + ")");
  Pressure pr;
  pr.n = n;
  pr.coeff.assign(n + 1, Int(0));
  for (uint64_t m = 0; m < (uint64_t{1} << n); ++m)
    pr.coeff[std::popcount(m)] += eng.cluster_term(m);
  pr.t = ctx.p / (1 - ctx.p);
  pr.t.canonicalize();
  pr.Y = pressure_Y_at(pr, pr.t);
  pr.f = log_rat(pr.Y) / n;
  Rat weighted;
  for (int k = 0; k <= n; ++k)
    weighted += Rat(k) * Rat(pr.coeff[k]) * rat_pow(pr.t, k);
  pr.dfdpi = weighted / (Rat(n) * pr.Y);
  pr.dfdpi.canonicalize();
  return pr;
}

Rat pressure_Y_at(const Pressure& pr, const Rat& t) {
  Rat y;
  for (int k = 0; k <= pr.n; ++k) y += Rat(pr.coeff[k]) * rat_pow(t, k);
  return y;
}

double pressure_f_at(const Pressure& pr, const Rat& t) {
  return log_rat(pressure_Y_at(pr, t)) / pr.n;
}

}  // namespace prcm
