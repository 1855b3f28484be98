#include <algorithm>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "prcm/homology.hpp"
#include "prcm/lattice.hpp"
#include "prcm/measure.hpp"
#include "prcm/rng.hpp"

using namespace prcm;

namespace {

Context grid_ctx(std::vector<int> lo, std::vector<int> hi, int i, int64_t q,
                 Rat p, Convention conv = Convention::Closed,
                 BoundaryCondition bc = BoundaryCondition::free_bc()) {
  Context ctx;
  ctx.d = static_cast<int>(lo.size());
  ctx.i = i;
  ctx.q = q;
  ctx.p = std::move(p);
  ctx.box = Box::primal(std::move(lo), std::move(hi), conv);
  ctx.bc = std::move(bc);
  return ctx;
}

// Percolation complex of a configuration: the full skeleton below dimension
// i plus the open candidates. Built from raw cell lists, independently of
// the engine's span bookkeeping.
CellComplex percolation_complex(const Context& ctx,
                                const std::vector<Cell>& cands,
                                uint64_t mask) {
  std::vector<Cell> cells;
  for (int k = 0; k < ctx.i; ++k)
    for (const Cell& c : enumerate_cells(ctx.box, k, ctx.i))
      cells.push_back(c);
  for (size_t j = 0; j < cands.size(); ++j)
    if (mask >> j & 1) cells.push_back(cands[j]);
  return complex_from_cells(ctx.d, cells);
}

// Component count of the open-edge graph on the box vertices (i = 1 only).
int open_components(const Context& ctx, const std::vector<Cell>& cands,
                    uint64_t mask) {
  CellIndex verts(enumerate_cells(ctx.box, 0, ctx.i));
  oracle::UnionFind uf(verts.size());
  for (size_t j = 0; j < cands.size(); ++j) {
    if (!(mask >> j & 1)) continue;
    auto faces = cell_boundary(cands[j]);
    uf.unite(verts.find(faces[0].first), verts.find(faces[1].first));
  }
  return uf.components();
}

// exp(eps) as an exact rational, Taylor to five terms; for eps = 1e-5ns the
// truncation error is far below the finite-difference tolerance.
Rat exp_rat(const Rat& eps) {
  Rat sum = 1, term = 1;
  for (int j = 1; j <= 5; ++j) {
    term *= eps / Rat(j);
    sum += term;
  }
  sum.canonicalize();
  return sum;
}

double fd_dfdpi(const Pressure& pr) {
  Rat r = exp_rat(Rat(1, 100000));
  double step = log_rat(r);
  return (pressure_f_at(pr, pr.t * r) - pressure_f_at(pr, pr.t / r)) /
         (2 * step);
}

}  // namespace

TEST_CASE("single edge, q = 2, p = 1/2, free: frozen weights") {
  Context ctx = grid_ctx({0, 0}, {1, 0}, 1, 2, Rat(1, 2));
  MeasureTable tab = enumerate_measure(ctx);
  REQUIRE(tab.n() == 1);
  // Closed: two isolated vertices, |H_0| = 4. Open: one component, |H_0| = 2.
  CHECK(tab.weights[0] == 4);
  CHECK(tab.weights[1] == 2);
  CHECK(tab.total == 6);
  CHECK(tab.prob(1) == Rat(1, 3));
  CHECK(tab.Z == make_rat(6, 2));
  CHECK(plaquette_marginal(tab, tab.candidates[0]) == Rat(1, 3));
}

TEST_CASE("unit square, q = 2, p = 1/2, free: frozen table") {
  Context ctx = grid_ctx({0, 0}, {1, 1}, 1, 2, Rat(1, 2));
  MeasureTable tab = enumerate_measure(ctx);
  REQUIRE(tab.n() == 4);
  CHECK(tab.weights[0] == 16);
  CHECK(tab.weights[0b1111] == 2);
  CHECK(tab.total == 82);
  CHECK(plaquette_marginal(tab, tab.candidates[0]) == Rat(14, 41));
  Rat sum;
  for (uint64_t m = 0; m < 16; ++m) sum += tab.prob(m);
  CHECK(sum == 1);

  // Wired on this box adjoins all four edges, so every configuration has one
  // component: the measure degenerates to product Bernoulli.
  Context wctx = ctx;
  wctx.bc = BoundaryCondition::wired();
  MeasureTable wtab = enumerate_measure(wctx);
  for (uint64_t m = 0; m < 16; ++m) CHECK(wtab.prob(m) == Rat(1, 16));
}

TEST_CASE("q = 1 collapses to product Bernoulli for every bc kind") {
  Rat p(2, 7);
  std::vector<BoundaryCondition> bcs = {
      BoundaryCondition::free_bc(), BoundaryCondition::wired(),
      BoundaryCondition::plaquettes({Cell{{4, 2}, {1}}}),
      BoundaryCondition::wired_at_infinity({Cell{{4, 2}, {1}}})};
  for (const auto& bc : bcs) {
    Context ctx = grid_ctx({0, 0}, {1, 1}, 1, 1, p, Convention::Closed, bc);
    MeasureTable tab = enumerate_measure(ctx);
    for (uint64_t m = 0; m < tab.weights.size(); ++m) {
      unsigned k = std::popcount(m);
      CHECK(tab.prob(m) == rat_pow(p, k) * rat_pow(1 - p, tab.n() - k));
    }
  }
}

TEST_CASE("degenerate p concentrates the measure") {
  Context ctx = grid_ctx({0, 0}, {2, 2}, 1, 3, Rat(0));
  MeasureTable tab = enumerate_measure(ctx);
  CHECK(tab.prob(0) == 1);
  ctx.p = Rat(1);
  tab = enumerate_measure(ctx);
  CHECK(tab.prob(tab.weights.size() - 1) == 1);
}

TEST_CASE("dual parameter: frozen values, involution, self-dual point") {
  CHECK(dual_parameter(Rat(1, 2), 2) == Rat(2, 3));
  CHECK(dual_parameter(Rat(1, 2), 1) == Rat(1, 2));
  CHECK(dual_parameter(Rat(1, 4), 1) == Rat(3, 4));
  CHECK(dual_parameter(Rat(2, 3), 4) == Rat(2, 3));
  CHECK(self_dual_p(4) == Rat(2, 3));
  CHECK(self_dual_p(1) == Rat(1, 2));
  CHECK(self_dual_p(9) == Rat(3, 4));
  for (int64_t q : {1, 2, 3, 4, 6}) {
    for (Rat p : {Rat(1, 4), Rat(1, 2), Rat(3, 4), Rat(0), Rat(1)})
      CHECK(dual_parameter(dual_parameter(p, q), q) == p);
    // The approximate self-dual point is a fixed point to ~1e-11.
    Rat sd = self_dual_p(q);
    double drift = rat_to_double(dual_parameter(sd, q) - sd);
    CHECK(std::abs(drift) < 1e-10);
  }
}

TEST_CASE("candidate duality is a bijection and dual_mask is involutive") {
  Context ctx = grid_ctx({0, 0}, {2, 2}, 1, 2, Rat(1, 2));
  Context dctx = dual_context(ctx);
  auto pc = candidate_plaquettes(ctx);
  auto dc = candidate_plaquettes(dctx);
  REQUIRE(pc.size() == 12);
  REQUIRE(dc.size() == 12);
  std::set<Cell> dset(dc.begin(), dc.end());
  for (const Cell& c : pc) CHECK(dset.contains(dual_cell(c)));
  Rng rng(11);
  for (int it = 0; it < 50; ++it) {
    uint64_t m = rng.below(uint64_t{1} << 12);
    uint64_t dm = dual_mask(pc, dc, m);
    CHECK(std::popcount(m) + std::popcount(dm) == 12);
    CHECK(dual_mask(dc, pc, dm) == m);
  }
  // Dual of the dual context is the original up to bc bookkeeping.
  Context back = dual_context(dctx);
  CHECK(back.box == ctx.box);
  CHECK(back.i == ctx.i);
  CHECK(back.p == ctx.p);
}

TEST_CASE("exact duality of tables in d = 2") {
  for (int64_t q : {1, 2, 3}) {
    for (Rat p : {Rat(1, 4), Rat(1, 2), Rat(3, 4)}) {
      Context ctx = grid_ctx({0, 0}, {1, 1}, 1, q, p);
      DualityReport rep = verify_duality(ctx);
      CHECK(rep.ok);
      CHECK(rep.configs == 16);
      CHECK(rep.max_discrepancy == 0);
    }
  }
  // Open primal box, wired <-> free swapped the other way.
  Context octx = grid_ctx({0, 0}, {2, 2}, 1, 3, Rat(1, 3), Convention::Open,
                          BoundaryCondition::wired());
  DualityReport rep = verify_duality(octx);
  CHECK(rep.ok);
  CHECK(rep.configs == 16);
}

TEST_CASE("exact duality at the self-dual point of q = 4") {
  Context ctx = grid_ctx({0, 0}, {1, 1}, 1, 4, self_dual_p(4));
  Context dctx = dual_context(ctx);
  CHECK(dctx.p == ctx.p);
  CHECK(verify_duality(ctx).ok);
}

TEST_CASE("exact duality between i = 1 and i = 2 on the cube") {
  Context ctx = grid_ctx({0, 0, 0}, {1, 1, 1}, 1, 2, Rat(1, 2));
  DualityReport rep = verify_duality(ctx, 12);
  CHECK(rep.ok);
  CHECK(rep.configs == 4096);
  CHECK(rep.max_discrepancy == 0);
}

TEST_CASE("free and wired cluster terms match homology built from scratch") {
  Context ctx = grid_ctx({0, 0}, {2, 2}, 1, 3, Rat(1, 2));
  ClusterEngine free_eng = make_engine(ctx);
  Context wctx = ctx;
  wctx.bc = BoundaryCondition::wired();
  ClusterEngine wired_eng = make_engine(wctx);
  auto cands = candidate_plaquettes(ctx);
  Rng rng(23);
  for (int it = 0; it < 40; ++it) {
    uint64_t m = rng.below(uint64_t{1} << free_eng.n());
    CellComplex P = percolation_complex(ctx, cands, m);
    CHECK(free_eng.cluster_term(m) == homology_size_mod(P, 0, ctx.q));
    CHECK(free_eng.cluster_term(m) ==
          size_from_integral(integral_homology(P, 0), IntegralHomology{},
                             ctx.q));
    CHECK(wired_eng.cluster_term(m) == wired_size(P, ctx.box, ctx.i, ctx.q));
  }
}

TEST_CASE("i = 2 cluster terms on the cube match first homology") {
  Context ctx = grid_ctx({0, 0, 0}, {1, 1, 1}, 2, 2, Rat(1, 2));
  ClusterEngine eng = make_engine(ctx);
  auto cands = candidate_plaquettes(ctx);
  REQUIRE(eng.n() == 6);
  for (uint64_t m = 0; m < 64; ++m) {
    CellComplex P = percolation_complex(ctx, cands, m);
    CHECK(eng.cluster_term(m) == homology_size_mod(P, 1, ctx.q));
    auto h1 = integral_homology(P, 1);
    auto h0 = integral_homology(P, 0);
    CHECK(eng.cluster_term(m) == size_from_integral(h1, h0, ctx.q));
  }
}

TEST_CASE("direct and induced cluster styles give the same measure") {
  for (int64_t q : {2, 3, 4}) {
    Context ctx = grid_ctx({0, 0}, {2, 1}, 1, q, Rat(1, 3));
    Context pctx = ctx;
    pctx.bc = BoundaryCondition::plaquettes({});
    MeasureTable direct = enumerate_measure(ctx);
    MeasureTable induced = enumerate_measure(pctx);
    CHECK(same_measure(direct, induced));
    // The styles themselves differ by a configuration-independent factor.
    ClusterEngine de = make_engine(ctx);
    ClusterEngine ie = make_engine(pctx);
    Rat ratio = make_rat(de.cluster_term(0), ie.cluster_term(0));
    for (uint64_t m = 1; m < direct.weights.size(); ++m)
      CHECK(make_rat(de.cluster_term(m), ie.cluster_term(m)) == ratio);
  }
}

TEST_CASE("wired at infinity with no exceptions equals wired") {
  for (int64_t q : {1, 2, 3, 4}) {
    Context wctx = grid_ctx({0, 0}, {2, 2}, 1, q, Rat(1, 2), Convention::Closed,
                            BoundaryCondition::wired());
    Context ictx = wctx;
    ictx.bc = BoundaryCondition::wired_at_infinity();
    CHECK(same_measure(enumerate_measure(wctx), enumerate_measure(ictx)));
  }
  Context w3 = grid_ctx({0, 0, 0}, {1, 1, 1}, 2, 2, Rat(1, 2),
                        Convention::Closed, BoundaryCondition::wired());
  Context i3 = w3;
  i3.bc = BoundaryCondition::wired_at_infinity();
  CHECK(same_measure(enumerate_measure(w3), enumerate_measure(i3)));
}

TEST_CASE("plaquette boundary conditions change the measure as adjoined cells") {
  // One exterior edge glued to the right side of the box: configurations are
  // weighted by the homology of P plus that edge. Oracle: build the complex
  // with the extra edge directly.
  Cell extra{{4, 2}, {1}};
  Context ctx = grid_ctx({0, 0}, {2, 2}, 1, 3, Rat(1, 2), Convention::Closed,
                         BoundaryCondition::plaquettes({extra}));
  ClusterEngine eng = make_engine(ctx);
  auto cands = candidate_plaquettes(ctx);
  Context fctx = ctx;
  fctx.bc = BoundaryCondition::free_bc();
  Rng rng(31);
  Int ratio_num = -1, ratio_den = -1;
  for (int it = 0; it < 30; ++it) {
    uint64_t m = rng.below(uint64_t{1} << eng.n());
    std::vector<Cell> cells;
    for (int k = 0; k < ctx.i; ++k)
      for (const Cell& c : enumerate_cells(ctx.box, k, ctx.i))
        cells.push_back(c);
    for (size_t j = 0; j < cands.size(); ++j)
      if (m >> j & 1) cells.push_back(cands[j]);
    cells.push_back(extra);
    CellComplex Paug = complex_closure(ctx.d, cells);
    Int direct = homology_size_mod(Paug, 0, ctx.q);
    // Induced style differs from |H_0| by one global constant.
    if (ratio_num < 0) {
      ratio_num = direct;
      ratio_den = eng.cluster_term(m);
    }
    CHECK(direct * ratio_den == eng.cluster_term(m) * ratio_num);
  }
}

TEST_CASE("plaquettes(xi) <-> wired-at-infinity(dual xi) duality") {
  Cell xi{{4, 2}, {1}};
  Context ctx = grid_ctx({0, 0}, {1, 1}, 1, 2, Rat(1, 2), Convention::Closed,
                         BoundaryCondition::plaquettes({xi}));
  Context dctx = dual_context(ctx);
  CHECK(dctx.bc.kind == BoundaryCondition::Kind::WiredAtInfinity);
  REQUIRE(dctx.bc.cells.size() == 1);
  CHECK(dctx.bc.cells[0] == dual_cell(xi));
  DualityReport rep = verify_duality(ctx);
  CHECK(rep.ok);
  CHECK(rep.max_discrepancy == 0);

  // And the reverse orientation, starting from the wired-at-infinity side.
  DualityReport rev = verify_duality(dctx);
  CHECK(rev.ok);
}

TEST_CASE("sampled duality agrees with itself on a larger box") {
  Context ctx = grid_ctx({0, 0}, {3, 3}, 1, 2, Rat(1, 2));
  REQUIRE(candidate_plaquettes(ctx).size() == 24);
  DualityReport rep = verify_duality_sampled(ctx, 60, 7);
  CHECK(rep.ok);
  CHECK(rep.configs == 60);
}

TEST_CASE("truncation certificates stabilize") {
  Cell xi{{4, 2}, {1}};
  Context pctx = grid_ctx({0, 0}, {1, 1}, 1, 3, Rat(1, 2), Convention::Closed,
                          BoundaryCondition::plaquettes({xi}));
  StabilizationCertificate cert = stabilize_truncation(pctx);
  CHECK(cert.pad == 0);
  CHECK(same_measure(cert.at_pad, cert.at_next));
  CHECK(same_measure(cert.at_pad, enumerate_measure(pctx)));

  Context ictx = pctx;
  ictx.bc = BoundaryCondition::wired_at_infinity({dual_cell(xi)});
  // Wrong lattice for this box.
  CHECK_THROWS_AS(validate_context(ictx), std::invalid_argument);
  ictx.bc = BoundaryCondition::wired_at_infinity({xi});
  StabilizationCertificate icert = stabilize_truncation(ictx);
  CHECK(icert.pad >= 1);
  CHECK(same_measure(icert.at_pad, icert.at_next));
  CHECK(same_measure(icert.at_pad, enumerate_measure(ictx)));

  // Free and wired window flavors agree at the certified pad: the sandwich
  // that pins the infinite-volume limit.
  MeasureTable tf = table_from_engine(
      make_window_engine(ictx, icert.pad, WindowFlavor::FreeWindow));
  CHECK(same_measure(icert.at_pad, tf));
}

TEST_CASE("conditioning on exterior states: plain branch") {
  Context outer = grid_ctx({0, 0}, {2, 2}, 1, 2, Rat(1, 2));
  Box inner = Box::primal({0, 0}, {1, 1}, Convention::Closed);
  for (uint64_t pins : {uint64_t{0}, uint64_t{0xff}, uint64_t{0b10110101},
                        uint64_t{0b01001010}}) {
    ConditioningReport rep = verify_conditioning(outer, inner, pins);
    CHECK(rep.ok);
  }
  Cell xi{{4, 2}, {1}};
  Context outer_xi = outer;
  outer_xi.bc = BoundaryCondition::plaquettes({xi});
  ConditioningReport rep = verify_conditioning(outer_xi, inner, 0b1100);
  CHECK(rep.ok);
  CHECK(rep.detail.find("plain") != std::string::npos);
}

TEST_CASE("conditioning on exterior states: wired branch") {
  Context outer = grid_ctx({0, 0}, {2, 2}, 1, 3, Rat(1, 3), Convention::Closed,
                           BoundaryCondition::wired());
  Box inner = Box::primal({0, 0}, {1, 1}, Convention::Closed);
  for (uint64_t pins : {uint64_t{0}, uint64_t{0xff}, uint64_t{0b0110011}}) {
    ConditioningReport rep = verify_conditioning(outer, inner, pins);
    CHECK(rep.ok);
    CHECK(rep.detail.find("wired") != std::string::npos);
  }
  Context outer_inf = outer;
  outer_inf.bc = BoundaryCondition::wired_at_infinity({Cell{{6, 2}, {1}}});
  ConditioningReport rep = verify_conditioning(outer_inf, inner, 0b1010);
  CHECK(rep.ok);
}

TEST_CASE("FKG lattice condition holds on small grids") {
  for (int64_t q : {1, 2, 3, 6}) {
    Context ctx = grid_ctx({0, 0}, {2, 1}, 1, q, Rat(1, 2));
    CHECK(!fkg_violation(enumerate_measure(ctx)));
    Context wctx = ctx;
    wctx.bc = BoundaryCondition::wired();
    CHECK(!fkg_violation(enumerate_measure(wctx)));
  }
  Context cube = grid_ctx({0, 0, 0}, {1, 1, 1}, 2, 3, Rat(2, 5));
  CHECK(!fkg_violation(enumerate_measure(cube)));
}

TEST_CASE("Holley: wired dominates free, higher p dominates lower") {
  Context free_ctx = grid_ctx({0, 0}, {2, 1}, 1, 3, Rat(1, 2));
  Context wired_ctx = free_ctx;
  wired_ctx.bc = BoundaryCondition::wired();
  MeasureTable ft = enumerate_measure(free_ctx);
  MeasureTable wt = enumerate_measure(wired_ctx);
  CHECK(!holley_violation(wt, ft));
  // The domination is strict on this box, so the reversed condition fails.
  CHECK(holley_violation(ft, wt).has_value());
  CHECK(plaquette_marginal(wt, wt.candidates[0]) >
        plaquette_marginal(ft, ft.candidates[0]));

  Context lo_p = free_ctx, hi_p = free_ctx;
  lo_p.p = Rat(1, 4);
  hi_p.p = Rat(3, 4);
  CHECK(!holley_violation(enumerate_measure(hi_p), enumerate_measure(lo_p)));
}

TEST_CASE("duality exponent is configuration independent") {
  for (int64_t q : {1, 2, 3, 4}) {
    Context ctx = grid_ctx({0, 0}, {2, 2}, 1, q, Rat(1, 2));
    EpReport rep = verify_ep(ctx, 1 << 12, 5);
    CHECK(rep.ok);
    CHECK(rep.configs == 4096);
  }
  Context c3 = grid_ctx({0, 0, 0}, {1, 1, 1}, 1, 2, Rat(1, 2));
  EpReport r3 = verify_ep(c3, 1 << 12, 5);
  CHECK(r3.ok);
  Context c32 = grid_ctx({0, 0, 0}, {1, 1, 1}, 2, 3, Rat(1, 2));
  EpReport r32 = verify_ep(c32, 64, 5);
  CHECK(r32.ok);
  // d = 4 sampled: 24 candidate squares on the 4-cube.
  Context c4 = grid_ctx({0, 0, 0, 0}, {1, 1, 1, 1}, 2, 2, Rat(1, 2));
  REQUIRE(candidate_plaquettes(c4).size() == 24);
  EpReport r4 = verify_ep(c4, 120, 5);
  CHECK(r4.ok);
  CHECK(r4.configs == 120);
}

TEST_CASE("i = 1 free measure is the classical random-cluster model") {
  Context ctx = grid_ctx({0, 0}, {2, 2}, 1, 4, Rat(2, 5));
  ClusterEngine eng = make_engine(ctx);
  auto cands = candidate_plaquettes(ctx);
  Rng rng(41);
  for (int it = 0; it < 50; ++it) {
    uint64_t m = rng.below(uint64_t{1} << eng.n());
    Int expect = int_pow(Int(ctx.q), open_components(ctx, cands, m));
    CHECK(eng.cluster_term(m) == expect);
  }
  Context c3 = grid_ctx({0, 1, 0}, {1, 2, 1}, 1, 3, Rat(1, 2));
  ClusterEngine e3 = make_engine(c3);
  auto cands3 = candidate_plaquettes(c3);
  for (int it = 0; it < 30; ++it) {
    uint64_t m = rng.below(uint64_t{1} << e3.n());
    CHECK(e3.cluster_term(m) ==
          int_pow(Int(c3.q), open_components(c3, cands3, m)));
  }
}

TEST_CASE("two-point connectivity via null homology classes") {
  Context ctx = grid_ctx({0, 0}, {2, 1}, 1, 2, Rat(1, 2));
  ClusterEngine eng = make_engine(ctx);
  MeasureTable tab = table_from_engine(eng);
  auto cands = candidate_plaquettes(ctx);
  // gamma = difference of two corner vertices: null iff they are connected.
  std::vector<std::pair<Cell, int>> gamma = {{Cell{{0, 0}, {}}, 1},
                                             {Cell{{4, 2}, {}}, -1}};
  Rat prob = null_homology_probability(ctx, gamma);
  CellIndex verts(enumerate_cells(ctx.box, 0, 1));
  Int connected = 0;
  for (uint64_t m = 0; m < tab.weights.size(); ++m) {
    oracle::UnionFind uf(verts.size());
    for (size_t j = 0; j < cands.size(); ++j) {
      if (!(m >> j & 1)) continue;
      auto faces = cell_boundary(cands[j]);
      uf.unite(verts.find(faces[0].first), verts.find(faces[1].first));
    }
    if (uf.find(verts.find(Cell{{0, 0}, {}})) ==
        uf.find(verts.find(Cell{{4, 2}, {}})))
      connected += tab.weights[m];
  }
  CHECK(prob == make_rat(connected, tab.total));
  CHECK(prob > 0);
  CHECK(prob < 1);
}

TEST_CASE("null homology of a face boundary on the cube") {
  Context ctx = grid_ctx({0, 0, 0}, {1, 1, 1}, 2, 2, Rat(1, 2));
  ClusterEngine eng = make_engine(ctx);
  // gamma = boundary of the bottom face, a genuine 1-cycle.
  std::vector<std::pair<Cell, int>> gamma;
  for (auto& [f, s] : cell_boundary(Cell{{0, 0, 0}, {1, 2}})) gamma.push_back({f, s});
  Rat prob = null_homology_probability(ctx, gamma);
  CHECK(prob > 0);
  CHECK(prob < 1);
  // With every plaquette open the class dies; with none open it survives.
  CHECK(gamma_null_in(eng, gamma, (1u << eng.n()) - 1));
  CHECK(!gamma_null_in(eng, gamma, 0));
  // A non-cycle is rejected.
  std::vector<std::pair<Cell, int>> bad = {{Cell{{0, 0, 0}, {1}}, 1}};
  CHECK_THROWS_AS(null_homology_probability(ctx, bad), std::invalid_argument);
}

TEST_CASE("pressure: q = 1 closed forms and exact derivative") {
  Context ctx = grid_ctx({0, 0}, {2, 2}, 1, 1, Rat(1, 3));
  Pressure pr = pressure(ctx);
  REQUIRE(pr.n == 12);
  // Y(t) = (1+t)^n, so coeff[k] = C(n, k).
  Int binom = 1;
  for (int k = 0; k <= pr.n; ++k) {
    CHECK(pr.coeff[k] == binom);
    binom = binom * (pr.n - k) / (k + 1);
  }
  CHECK(pr.dfdpi == ctx.p);
  CHECK(std::abs(pr.f - log_rat(1 + pr.t)) < 1e-14);
}

TEST_CASE("pressure: finite differences match the exact derivative") {
  std::vector<Context> cases = {
      grid_ctx({0, 0}, {2, 2}, 1, 2, Rat(1, 2)),
      grid_ctx({0, 0}, {2, 1}, 1, 3, Rat(1, 4),
               Convention::Closed, BoundaryCondition::wired()),
      grid_ctx({0, 0, 0}, {1, 1, 1}, 2, 4, Rat(3, 5)),
  };
  for (const Context& ctx : cases) {
    Pressure pr = pressure(ctx);
    CHECK(std::abs(rat_to_double(pr.dfdpi) - fd_dfdpi(pr)) < 1e-8);
  }
}

TEST_CASE("pressure: exact midpoint convexity on a geometric grid") {
  Context ctx = grid_ctx({0, 0}, {2, 2}, 1, 3, Rat(1, 2));
  Pressure pr = pressure(ctx);
  Rat rho(11, 10);
  Rat t = Rat(1, 5);
  for (int j = 0; j < 25; ++j) {
    Rat lo = pressure_Y_at(pr, t);
    Rat mid = pressure_Y_at(pr, t * rho);
    Rat hi = pressure_Y_at(pr, t * rho * rho);
    CHECK(lo * hi >= mid * mid);
    t *= rho;
  }
}

TEST_CASE("marginals are monotone in the box: free up, wired down") {
  Cell edge{{0, 0}, {1}};
  std::vector<Box> boxes = {
      Box::primal({0, 0}, {1, 1}, Convention::Closed),
      Box::primal({0, 0}, {2, 1}, Convention::Closed),
      Box::primal({-1, 0}, {2, 1}, Convention::Closed),
  };
  for (int64_t q : {2, 3}) {
    Rat prev_free(-1), prev_wired(2);
    for (const Box& b : boxes) {
      Context fctx;
      fctx.d = 2;
      fctx.i = 1;
      fctx.q = q;
      fctx.p = Rat(1, 2);
      fctx.box = b;
      Context wctx = fctx;
      wctx.bc = BoundaryCondition::wired();
      Rat mf = plaquette_marginal(enumerate_measure(fctx), edge);
      Rat mw = plaquette_marginal(enumerate_measure(wctx), edge);
      CHECK(mf >= prev_free);
      CHECK(mw <= prev_wired);
      CHECK(mf <= mw);
      prev_free = mf;
      prev_wired = mw;
    }
  }
}

TEST_CASE("context validation rejects malformed inputs") {
  Context ctx = grid_ctx({0, 0}, {1, 1}, 1, 2, Rat(1, 2));
  Context bad = ctx;
  bad.i = 3;
  CHECK_THROWS_AS(validate_context(bad), std::invalid_argument);
  bad = ctx;
  bad.q = 0;
  CHECK_THROWS_AS(validate_context(bad), std::invalid_argument);
  bad = ctx;
  bad.p = Rat(5, 4);
  CHECK_THROWS_AS(validate_context(bad), std::invalid_argument);
  bad = ctx;
  bad.bc = BoundaryCondition::plaquettes({Cell{{0, 0}, {1}}});  // inside box
  CHECK_THROWS_AS(validate_context(bad), std::invalid_argument);
  bad = ctx;
  bad.bc = BoundaryCondition::wired();
  bad.bc.cells.push_back(Cell{{4, 0}, {1}});
  CHECK_THROWS_AS(validate_context(bad), std::invalid_argument);
  bad = ctx;
  bad.bc = BoundaryCondition::plaquettes(
      {Cell{{4, 0}, {1}}, Cell{{4, 0}, {1}}});
  CHECK_THROWS_AS(validate_context(bad), std::invalid_argument);

  // Cap refusal names the candidate count.
  Context big = grid_ctx({0, 0}, {4, 4}, 1, 2, Rat(1, 2));
  CHECK_THROWS_WITH_AS(enumerate_measure(big, 20),
                       doctest::Contains("2^40"), std::invalid_argument);
  // No dual at i = d.
  Context top = grid_ctx({0, 0}, {1, 1}, 2, 2, Rat(1, 2));
  CHECK_THROWS_AS(dual_context(top), std::invalid_argument);
}

TEST_CASE("conditional enumeration pins cells") {
  Context ctx = grid_ctx({0, 0}, {1, 1}, 1, 2, Rat(1, 2));
  auto cands = candidate_plaquettes(ctx);
  MeasureTable cond = enumerate_conditional(ctx, {cands[0]}, {cands[1]});
  REQUIRE(cond.n() == 2);
  MeasureTable full = enumerate_measure(ctx);
  // Conditional probabilities equal restricted renormalized full ones:
  // full mask = bit0 (open) + free bits at candidates 2, 3.
  Int sub_total = 0;
  for (uint64_t s = 0; s < 4; ++s)
    sub_total += full.weights[1 | (s & 1 ? 4 : 0) | (s & 2 ? 8 : 0)];
  for (uint64_t s = 0; s < 4; ++s) {
    uint64_t fullmask = 1 | (s & 1 ? 4 : 0) | (s & 2 ? 8 : 0);
    CHECK(cond.prob(s) == make_rat(full.weights[fullmask], sub_total));
  }
  CHECK_THROWS_AS(enumerate_conditional(ctx, {cands[0]}, {cands[0]}),
                  std::invalid_argument);
  CHECK_THROWS_AS(enumerate_conditional(ctx, {Cell{{8, 8}, {1}}}, {}),
                  std::invalid_argument);
}

TEST_CASE("same_measure distinguishes genuinely different measures") {
  Context a = grid_ctx({0, 0}, {1, 1}, 1, 2, Rat(1, 2));
  Context b = a;
  b.p = Rat(1, 3);
  CHECK(!same_measure(enumerate_measure(a), enumerate_measure(b)));
  Context c = grid_ctx({0, 0}, {2, 1}, 1, 2, Rat(1, 2));
  CHECK_THROWS_AS(same_measure(enumerate_measure(a), enumerate_measure(c)),
                  std::invalid_argument);
}
