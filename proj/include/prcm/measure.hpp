// Exact finite-volume plaquette random-cluster measures: configuration
// weights with free / wired / plaquette-set / wired-at-infinity boundary
// conditions, full-table enumeration in rational arithmetic, duality of
// contexts and configurations, lattice-condition checks, conditioning
// consistency, and pressure diagnostics. Everything in enumeration mode is
// exact; no floating point except final log values.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prcm/homology.hpp"
#include "prcm/lattice.hpp"
#include "prcm/rational.hpp"
#include "prcm/zq_linalg.hpp"

namespace prcm {

struct BoundaryCondition {
  enum class Kind { Free, Wired, Plaquettes, WiredAtInfinity };
  Kind kind = Kind::Free;
  // Plaquettes: the exterior i-cells that are open (all others closed).
  // WiredAtInfinity: the exterior i-cells that are CLOSED (all others open),
  // so WiredAtInfinity({}) is the fully wired environment.
  std::vector<Cell> cells;

  static BoundaryCondition free_bc() { return {Kind::Free, {}}; }
  static BoundaryCondition wired() { return {Kind::Wired, {}}; }
  static BoundaryCondition plaquettes(std::vector<Cell> xi) {
    return {Kind::Plaquettes, std::move(xi)};
  }
  static BoundaryCondition wired_at_infinity(std::vector<Cell> closed = {}) {
    return {Kind::WiredAtInfinity, std::move(closed)};
  }
  bool operator==(const BoundaryCondition&) const = default;
};

std::string bc_name(const BoundaryCondition& bc);

struct Context {
  int d = 2;
  int i = 1;
  int64_t q = 2;
  Rat p = Rat(1, 2);
  Box box = Box::primal({0, 0}, {1, 1}, Convention::Closed);
  BoundaryCondition bc = BoundaryCondition::free_bc();
};

// Throws std::invalid_argument with a reason. i = d is allowed (no duality);
// q >= 1; p in [0,1]; bc cells must be exterior i-cells.
void validate_context(const Context& ctx);

// The i-cells the measure randomizes over, canonically sorted. Bit j of a
// configuration mask refers to entry j of this list.
std::vector<Cell> candidate_plaquettes(const Context& ctx);

// p* = (1-p) q / ((1-p) q + p).
Rat dual_parameter(const Rat& p, int64_t q);

// Rational value of sqrt(q)/(1 + sqrt(q)): exact for square q, else a
// continued-fraction approximation (any rational parameter is valid; this is
// just a convenient point near the self-dual one).
Rat self_dual_p(int64_t q);

// Dual model: box dualized, dimension d-i, parameter p*, boundary condition
// swapped Free<->Wired, Plaquettes(xi)<->WiredAtInfinity(duals(xi)).
// Requires 1 <= i <= d-1.
Context dual_context(const Context& ctx);

// Mask of the dual configuration: dual candidate open iff the matching
// primal candidate is closed. Both lists must be dual bijective.
uint64_t dual_mask(const std::vector<Cell>& primal_candidates,
                   const std::vector<Cell>& dual_candidates, uint64_t mask);

// Exact weight machinery for one context, precomputed once. The ambient
// complex carries the (i-1)-skeleton of the working region (box, or box
// grown to the certified truncation window, or box plus the closure of the
// bc plaquettes). `base` spans the boundary-condition generators.
//
// Two cluster-term styles:
//   direct:  |H_{i-1}| of the percolation complex with bc cells adjoined,
//            |Z_{i-1}(ambient)| / |span(base + open columns)|.
//   induced: order of the inclusion-induced image of H_{i-1}(percolation
//            complex of the box) in the bc-augmented complex,
//            |span(base + open columns + Z_box)| / |span(base + open cols)|.
// The two differ by a configuration-independent factor, so they define the
// same measure; weights use direct for Free/Wired and induced for the
// xi-type conditions.
struct ClusterEngine {
  Context ctx;
  std::vector<Cell> candidates;
  CellComplex ambient;
  Int skeleton_kernel = 1;
  HowellForm base;
  std::vector<std::vector<int64_t>> cols;
  std::vector<std::vector<int64_t>> box_cycles;
  bool induced_style = false;
  int pad = 0;  // certified truncation radius (WiredAtInfinity only)

  int n() const { return static_cast<int>(candidates.size()); }
  Int boundary_span(uint64_t mask) const;
  Int cluster_direct(uint64_t mask) const;
  Int cluster_induced(uint64_t mask) const;
  Int cluster_term(uint64_t mask) const;
  // p^{|P|} (1-p)^{n-|P|} * cluster_term, exact.
  Rat weight(uint64_t mask) const;
  // a^{|P|} (b-a)^{n-|P|} * cluster_term with p = a/b: the same weight scaled
  // by b^n, kept integral for lattice-condition cross-multiplication.
  Int weight_int(uint64_t mask) const;
};

// Builds the engine; runs the truncation certificate for WiredAtInfinity
// (throws if no stabilization within the radius cap).
ClusterEngine make_engine(const Context& ctx);

// Truncation window machinery, exposed for certificates and tests: the
// window is the closed box grown by `pad`; FreeWindow opens the exterior
// cells (minus exceptions) and nothing else, WiredWindow additionally kills
// every (i-1)-cycle supported on the window's boundary shell.
enum class WindowFlavor { FreeWindow, WiredWindow };
ClusterEngine make_window_engine(const Context& ctx, int pad,
                                 WindowFlavor flavor);

struct MeasureTable {
  Context ctx;
  std::vector<Cell> candidates;
  std::vector<Int> weights;  // index = configuration mask, scaled by b^n
  Int total = 0;
  Rat Z;  // sum of p^{|P|}(1-p)^{n-|P|} cluster terms
  Rat Y;  // (1-p)^{-n} Z (zero when p = 1)
  int pad = 0;

  int n() const { return static_cast<int>(candidates.size()); }
  Rat prob(uint64_t mask) const;
};

// Exact table over all 2^n configurations. Refuses (std::invalid_argument,
// message includes the count) when n exceeds the cap. Deterministic; honors
// PRCM_THREADS for the weight loop.
MeasureTable enumerate_measure(const Context& ctx, int cap = 20);
MeasureTable table_from_engine(const ClusterEngine& eng, int cap = 20);

// Conditional table: listed cells pinned open/closed, remaining candidates
// enumerated. Table candidates = free cells only.
MeasureTable enumerate_conditional(const Context& ctx,
                                   const std::vector<Cell>& pinned_open,
                                   const std::vector<Cell>& pinned_closed,
                                   int cap = 20);

// Exact equality of two tables as measures (same candidate count required).
bool same_measure(const MeasureTable& a, const MeasureTable& b);

// Truncation stabilization: smallest pad whose table equals the pad+1 table
// exactly (and, for WiredAtInfinity, whose free- and wired-window flavors
// agree, pinning the infinite-volume limit). Throws when nothing stabilizes
// within the cap.
struct StabilizationCertificate {
  int pad = 0;
  MeasureTable at_pad, at_next;
};
StabilizationCertificate stabilize_truncation(const Context& ctx,
                                              int pad_cap = 4, int cap = 20);

// P(sigma open) under the table's measure.
Rat plaquette_marginal(const MeasureTable& tab, const Cell& sigma);

// mu([gamma] = 0 in H_{i-1}; Z_q) for an (i-1)-cycle gamma given as signed
// cells; the class is tested in the same bc-augmented complex the cluster
// term uses. Throws if gamma is not a cycle mod q.
Rat null_homology_probability(const Context& ctx,
                              const std::vector<std::pair<Cell, int>>& gamma,
                              int cap = 20);
bool gamma_null_in(const ClusterEngine& eng,
                   const std::vector<std::pair<Cell, int>>& gamma,
                   uint64_t mask);

struct PairWitness {
  uint64_t a = 0, b = 0;
};

// FKG lattice condition w(A|B) w(A&B) >= w(A) w(B) over all pairs; returns a
// violating pair if any.
std::optional<PairWitness> fkg_violation(const MeasureTable& tab);

// Holley cross-condition: hi(A|B) lo(A&B) >= hi(A) lo(B) over all pairs;
// passing implies hi stochastically dominates lo.
std::optional<PairWitness> holley_violation(const MeasureTable& hi,
                                            const MeasureTable& lo);

struct DualityReport {
  bool ok = true;
  uint64_t witness = 0;
  Rat max_discrepancy;  // 0 on success
  int configs = 0;
};

// Pointwise exact duality of the enumerated tables.
DualityReport verify_duality(const Context& ctx, int cap = 20);

// Per-configuration duality of weight ratios, for contexts too large to
// enumerate: checks w(P)/w(P') = w*(Q)/w*(Q') on random pairs.
DualityReport verify_duality_sampled(const Context& ctx, int samples,
                                     uint64_t seed);

struct EpReport {
  bool ok = true;
  long c = 0;  // cluster(P) * q^{|P|} / cluster*(Q) = q^c for every P
  uint64_t witness = 0;
  int configs = 0;
};

// Configuration-independence of the duality exponent: cluster terms taken in
// the free primal complex and the wired dual complex.
EpReport verify_ep(const Context& ctx, int samples, uint64_t seed);

struct ConditioningReport {
  bool ok = true;
  uint64_t witness = 0;
  std::string detail;
};

// Conditioning consistency: the outer measure conditioned on pinned exterior
// states equals the inner context carrying those states as its boundary
// condition. Outer bc Free/Plaquettes pins the plain branch, Wired /
// WiredAtInfinity the wired branch.
ConditioningReport verify_conditioning(const Context& outer, const Box& inner,
                                       uint64_t pinned_mask, int cap = 20);

struct Pressure {
  int n = 0;
  std::vector<Int> coeff;  // Y(t) = sum coeff[k] t^k, coeff[k] = cluster sum
  Rat t;                   // p / (1-p)
  Rat Y;
  double f = 0;  // log(Y) / n
  Rat dfdpi;     // E[#open] / n, exact
};

// Requires 0 < p < 1.
Pressure pressure(const Context& ctx, int cap = 20);
Rat pressure_Y_at(const Pressure& pr, const Rat& t);
double pressure_f_at(const Pressure& pr, const Rat& t);

}  // namespace prcm
