// Markov chains for the plaquette measures: single-plaquette heat-bath
// dynamics with exact rational acceptance odds, the spin/complex coupling
// whose marginals are the plaquette measure and the gauge Gibbs law, and
// estimators for loop observables. Chains are deterministic functions of the
// master seed; concurrent chains use chain_seed streams merged in index
// order.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prcm/measure.hpp"
#include "prcm/rng.hpp"

namespace prcm {

// Assignment of Z_q values to the (i-1)-cells of the engine's ambient
// complex, in ambient index order.
struct SpinConfig {
  std::vector<int64_t> f;
};

// One sequential chain. The cluster term of the current configuration is
// cached and kept in step; cache_ok() recomputes it from scratch.
struct ChainState {
  ClusterEngine eng;
  std::vector<uint8_t> open;        // per candidate
  std::optional<SpinConfig> spins;  // present for coupled chains
  uint64_t sweep = 0;
  Rng rng{0};
  Int cached_cluster = 1;

  int n() const { return eng.n(); }
  // Configuration as a bit mask; requires n <= 62.
  uint64_t mask() const;
  bool cache_ok() const;
};

// Heat-bath chain started all-closed. WiredAtInfinity contexts run their
// truncation certificate here.
ChainState make_chain(const Context& ctx, uint64_t seed);
// Coupled (spin, complex) chain; the coupling is for the free measure only.
ChainState make_coupled_chain(const Context& ctx, uint64_t seed);

// Resamples plaquette j from its exact conditional law and returns the open
// probability that was used. Direct-style engines use the class order of the
// plaquette boundary (one span build); induced-style engines compare the two
// cluster terms.
Rat heat_bath_step(ChainState& st, int j);
// Open probability of plaquette j given the rest; draws nothing and leaves
// the state unchanged.
Rat heat_bath_conditional(ChainState& st, int j);

// Batch-means accumulator with automatic batch doubling; stderr needs at
// least two batches.
struct SampleStats {
  double mean = 0;
  double variance = 0;
  double stderror = 0;
  uint64_t count = 0;
  int batches = 0;
};

struct Observable {
  std::string name;
  std::function<double(const ChainState&)> fn;
};

struct RunResult {
  std::vector<std::string> names;
  std::vector<SampleStats> stats;
  // Conditional-probability accumulation of the visited distribution over
  // configuration masks, normalized; filled when requested and n <= 20.
  std::vector<double> density;
  uint64_t sweeps_recorded = 0;
};

// Systematic-scan heat-bath sweeps; observables recorded once per sweep
// after burn-in. Deterministic given the seed.
RunResult run_chain(const Context& ctx, uint64_t sweeps, uint64_t burn_in,
                    uint64_t seed, const std::vector<Observable>& obs,
                    bool accumulate_density = false);

// One alternation of the coupling: spins given the complex, then the complex
// given the spins. Also used by run_coupled_chain.
void coupled_sweep(ChainState& st);

RunResult run_coupled_chain(const Context& ctx, uint64_t sweeps,
                            uint64_t burn_in, uint64_t seed,
                            const std::vector<Observable>& obs,
                            bool accumulate_density = false);

// f uniform over {f : <boundary(sigma), f> = 0 for every open sigma}.
SpinConfig sample_spins_given_complex(const ClusterEngine& eng,
                                      const std::vector<uint8_t>& open,
                                      Rng& rng);

// Each satisfied plaquette open independently with probability p; violated
// plaquettes always closed.
std::vector<uint8_t> sample_complex_given_spins(const ClusterEngine& eng,
                                                const SpinConfig& f, Rng& rng);

// <boundary(sigma_j), f> mod q: the discrete field strength through
// candidate j.
int64_t coboundary_value(const ClusterEngine& eng, const SpinConfig& f, int j);

// Minus the number of satisfied candidate plaquettes.
long plgt_energy(const ClusterEngine& eng, const SpinConfig& f);

// Loop observable estimates from a coupled chain: the spin indicator
// 1{f(gamma) = 0}, the primitive-character average cos(2 pi f(gamma)/q), and
// the percolation-side null-homology indicator. At enumeration scale the
// character estimator's conditional expectation is checked configuration by
// configuration against the null-homology indicator, and the exact values
// are reported.
struct WilsonReport {
  SampleStats indicator, character, membership;
  bool enumerated = false;
  bool certified_character = false;
  Rat exact_null;       // mu([gamma] = 0)
  Rat exact_indicator;  // E 1{f(gamma) = 0}
};

WilsonReport wilson_estimate(const Context& ctx,
                             const std::vector<std::pair<Cell, int>>& gamma,
                             uint64_t sweeps, uint64_t burn_in, uint64_t seed,
                             int enum_cap = 20);

}  // namespace prcm
