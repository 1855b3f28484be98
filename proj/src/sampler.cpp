#include "prcm/sampler.hpp"

#include <cassert>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace prcm {

namespace {

Int exact_div(const Int& num, const Int& den, const char* what) {
  if (den == 0 || !mpz_divisible_p(num.get_mpz_t(), den.get_mpz_t()))
    throw std::logic_error(std::string("inexact division in ") + what);
  Int r;
  mpz_divexact(r.get_mpz_t(), num.get_mpz_t(), den.get_mpz_t());
  return r;
}

// Span of base + open columns, optionally with one candidate left out. The
// open set is a vector so chains are not limited to 62 candidates.
HowellForm span_from_open(const ClusterEngine& eng,
                          const std::vector<uint8_t>& open, int skip = -1) {
  std::vector<std::vector<int64_t>> sel;
  for (int j = 0; j < eng.n(); ++j)
    if (j != skip && open[j]) sel.push_back(eng.cols[j]);
  return howell_extend(eng.base, sel);
}

Int cluster_from_open(const ClusterEngine& eng,
                      const std::vector<uint8_t>& open) {
  HowellForm b = span_from_open(eng, open);
  if (!eng.induced_style)
    return exact_div(eng.skeleton_kernel, b.span_size(), "cluster");
  Int denom = b.span_size();
  Int numer = howell_extend(b, eng.box_cycles).span_size();
  return exact_div(numer, denom, "cluster");
}

// Rows of the i-cell/(i-1)-cell incidence map restricted to open candidates;
// spin configurations compatible with P are exactly its kernel.
ModMatrix open_rows_matrix(const ClusterEngine& eng,
                           const std::vector<uint8_t>& open) {
  int cols = eng.ambient.ncells(eng.ctx.i - 1);
  std::vector<int> rows;
  for (int j = 0; j < eng.n(); ++j)
    if (open[j]) rows.push_back(j);
  ModMatrix M(eng.ctx.q, static_cast<int>(rows.size()), cols);
  for (size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < cols; ++c)
      M.set(static_cast<int>(r), c, eng.cols[rows[r]][c]);
  return M;
}

// Batch means with automatic batch doubling; the partial tail batch counts
// toward the mean but not the error estimate.
struct BatchAcc {
  std::vector<double> sums;
  double cur = 0;
  uint64_t cur_n = 0, batch = 1;
  double total = 0, total_sq = 0;
  uint64_t count = 0;

  void push(double x) {
    total += x;
    total_sq += x * x;
    ++count;
    cur += x;
    if (++cur_n < batch) return;
    sums.push_back(cur);
    cur = 0;
    cur_n = 0;
    if (sums.size() == 64) {
      std::vector<double> merged;
      for (size_t k = 0; k + 1 < sums.size(); k += 2)
        merged.push_back(sums[k] + sums[k + 1]);
      sums = std::move(merged);
      batch *= 2;
    }
  }

  SampleStats finish() const {
    SampleStats s;
    s.count = count;
    if (count == 0) return s;
    s.mean = total / double(count);
    s.variance = std::max(0.0, total_sq / double(count) - s.mean * s.mean);
    s.batches = static_cast<int>(sums.size());
    if (s.batches >= 2) {
      double bm = 0;
      for (double v : sums) bm += v / double(batch);
      bm /= s.batches;
      double var = 0;
      for (double v : sums) {
        double d = v / double(batch) - bm;
        var += d * d;
      }
      var /= (s.batches - 1);
      s.stderror = std::sqrt(var / s.batches);
    }
    return s;
  }
};

uint64_t open_mask(const std::vector<uint8_t>& open) {
  if (open.size() > 62) throw std::invalid_argument("too many candidates to mask");
  uint64_t m = 0;
  for (size_t j = 0; j < open.size(); ++j)
    if (open[j]) m |= uint64_t{1} << j;
  return m;
}

// kappa(. | f): product over candidates of open probability p (satisfied) or
// 0 (violated), accumulated over all masks by coordinate doubling.
void accumulate_coupled_density(const ClusterEngine& eng, const SpinConfig& f,
                                std::vector<double>& dens,
                                std::vector<double>& scratch) {
  int n = eng.n();
  double p = rat_to_double(eng.ctx.p);
  scratch.assign(size_t{1} << n, 0.0);
  scratch[0] = 1.0;
  size_t len = 1;
  for (int j = 0; j < n; ++j) {
    double pj = coboundary_value(eng, f, j) == 0 ? p : 0.0;
    for (size_t m = 0; m < len; ++m) {
      scratch[m + len] = scratch[m] * pj;
      scratch[m] *= 1.0 - pj;
    }
    len <<= 1;
  }
  for (size_t m = 0; m < scratch.size(); ++m) dens[m] += scratch[m];
}

RunResult run_loop(ChainState& st, uint64_t sweeps, uint64_t burn_in,
                   const std::vector<Observable>& obs, bool want_density,
                   bool coupled) {
  if (sweeps <= burn_in)
    throw std::invalid_argument("sweeps must exceed burn_in");
  int n = st.n();
  if (want_density && n > 20)
    throw std::invalid_argument("density accumulation needs <= 20 candidates");

  RunResult out;
  for (const auto& o : obs) out.names.push_back(o.name);
  std::vector<BatchAcc> accs(obs.size());
  std::vector<double> density, scratch;
  if (want_density) density.assign(size_t{1} << n, 0.0);
  double dens_weight = 0;
  // Estimator-only stream, split off so the trajectory is the same whether
  // or not a density is accumulated.
  Rng est_rng(splitmix64(st.rng.u64()));

  for (uint64_t s = 0; s < sweeps; ++s) {
    bool record = s >= burn_in;
    if (coupled) {
      coupled_sweep(st);
      if (record && want_density) {
        accumulate_coupled_density(st.eng, *st.spins, density, scratch);
        dens_weight += 1;
        // Extra spin redraws average out the conditional's dependence on
        // the particular f; the remaining error is the path's. The solution
        // set is the kernel of the open rows, factored once per sweep.
        ModuleMapSummary ker = kernel_mod(open_rows_matrix(st.eng, st.open));
        SpinConfig f;
        for (int e = 0; e < 3; ++e) {
          f.f.assign(size_t(ker.domain_cols), 0);
          for (int i = 0; i < ker.kernel.nrows(); ++i) {
            int64_t range = ker.q / ker.kernel.pivot_val[i];
            int64_t c = int64_t(est_rng.below(uint64_t(range)));
            if (c)
              for (int t = 0; t < ker.domain_cols; ++t)
                f.f[t] = (f.f[t] + c * ker.kernel.rows[i][t]) % ker.q;
          }
          accumulate_coupled_density(st.eng, f, density, scratch);
          dens_weight += 1;
        }
      }
    } else {
      for (int j = 0; j < n; ++j) {
        Rat r = heat_bath_step(st, j);
        if (record && want_density) {
          // Mix the conditional of every candidate, not just the updated
          // one: the estimate spreads over the whole Hamming-1 ball. For
          // direct-style engines the span with all open columns serves
          // every closed candidate (leaving a closed cell out changes
          // nothing), so only open candidates need a span rebuild.
          uint64_t m = open_mask(st.open);
          auto put = [&](int k, double rk) {
            uint64_t bit = uint64_t{1} << k;
            density[m | bit] += rk;
            density[m & ~bit] += 1.0 - rk;
            dens_weight += 1;
          };
          if (!st.eng.induced_style) {
            HowellForm all = span_from_open(st.eng, st.open);
            Int a = st.eng.ctx.p.get_num(), b = st.eng.ctx.p.get_den();
            for (int k = 0; k < n; ++k) {
              if (k == j)
                put(k, rat_to_double(r));
              else if (!st.open[k])
                put(k, rat_to_double(make_rat(
                           a, a + (b - a) * class_order(st.eng.cols[k], all))));
              else
                put(k, rat_to_double(heat_bath_conditional(st, k)));
            }
          } else {
            for (int k = 0; k < n; ++k)
              put(k, rat_to_double(k == j ? r : heat_bath_conditional(st, k)));
          }
        }
      }
    }
    ++st.sweep;
    if (record) {
      ++out.sweeps_recorded;
      for (size_t k = 0; k < obs.size(); ++k) accs[k].push(obs[k].fn(st));
    }
  }
  for (const auto& a : accs) out.stats.push_back(a.finish());
  if (want_density && dens_weight > 0) {
    for (double& v : density) v /= dens_weight;
    out.density = std::move(density);
  }
  return out;
}

std::vector<int64_t> gamma_vector(const ClusterEngine& eng,
                                  const std::vector<std::pair<Cell, int>>& gamma) {
  const CellIndex& idx = eng.ambient.at(eng.ctx.i - 1);
  std::vector<int64_t> v(idx.size(), 0);
  for (const auto& [c, coef] : gamma) {
    int pos = idx.find(c);
    if (pos < 0)
      throw std::invalid_argument("gamma cell " + format_cell(c) +
                                  " outside the ambient complex");
    v[pos] = ((v[pos] + coef) % eng.ctx.q + eng.ctx.q) % eng.ctx.q;
  }
  return v;
}

void check_gamma_cycle(const Context& ctx,
                       const std::vector<std::pair<Cell, int>>& gamma) {
  for (const auto& [c, coef] : gamma) {
    validate_cell(c);
    (void)coef;
    if (static_cast<int>(c.dirs.size()) != ctx.i - 1)
      throw std::invalid_argument("gamma must consist of (i-1)-cells");
  }
  if (ctx.i < 2) return;
  std::map<Cell, int64_t> acc;
  for (const auto& [c, coef] : gamma)
    for (const auto& [f, s] : cell_boundary(c)) acc[f] += int64_t(coef) * s;
  for (const auto& [f, v] : acc)
    if (v % ctx.q != 0)
      throw std::invalid_argument("gamma is not a cycle mod q");
}

}  // namespace

uint64_t ChainState::mask() const { return open_mask(open); }

bool ChainState::cache_ok() const {
  return cached_cluster == cluster_from_open(eng, open);
}

ChainState make_chain(const Context& ctx, uint64_t seed) {
  validate_context(ctx);
  ChainState st;
  st.eng = make_engine(ctx);
  st.open.assign(st.eng.n(), 0);
  st.rng = Rng(seed);
  st.cached_cluster = cluster_from_open(st.eng, st.open);
  return st;
}

ChainState make_coupled_chain(const Context& ctx, uint64_t seed) {
  if (ctx.bc.kind != BoundaryCondition::Kind::Free)
    throw std::invalid_argument(
        "the spin coupling is defined for the free measure");
  ChainState st = make_chain(ctx, seed);
  st.spins = SpinConfig{
      std::vector<int64_t>(st.eng.ambient.ncells(ctx.i - 1), 0)};
  return st;
}

namespace {

struct FlipWeights {
  Rat prob;
  Int cl_open, cl_closed;
};

// Conditional law of candidate j given the rest; restores st.open.
FlipWeights flip_weights(ChainState& st, int j) {
  const ClusterEngine& eng = st.eng;
  Int a = eng.ctx.p.get_num(), b = eng.ctx.p.get_den();
  FlipWeights w;
  if (!eng.induced_style) {
    HowellForm rest = span_from_open(eng, st.open, j);
    int64_t m = class_order(eng.cols[j], rest);
    w.prob = make_rat(a, a + (b - a) * m);
    w.cl_closed = exact_div(eng.skeleton_kernel, rest.span_size(), "heat bath");
    w.cl_open = exact_div(w.cl_closed, Int(m), "heat bath");
  } else {
    uint8_t saved = st.open[j];
    st.open[j] = 1;
    w.cl_open = cluster_from_open(eng, st.open);
    st.open[j] = 0;
    w.cl_closed = cluster_from_open(eng, st.open);
    st.open[j] = saved;
    w.prob = make_rat(a * w.cl_open, a * w.cl_open + (b - a) * w.cl_closed);
  }
  return w;
}

}  // namespace

Rat heat_bath_conditional(ChainState& st, int j) {
  if (j < 0 || j >= st.n()) throw std::invalid_argument("bad candidate index");
  return flip_weights(st, j).prob;
}

Rat heat_bath_step(ChainState& st, int j) {
  if (j < 0 || j >= st.n()) throw std::invalid_argument("bad candidate index");
  FlipWeights w = flip_weights(st, j);
  bool o = st.rng.bernoulli(w.prob);
  st.open[j] = o ? 1 : 0;
  st.cached_cluster = o ? w.cl_open : w.cl_closed;
  assert(st.cache_ok());
  return w.prob;
}

RunResult run_chain(const Context& ctx, uint64_t sweeps, uint64_t burn_in,
                    uint64_t seed, const std::vector<Observable>& obs,
                    bool accumulate_density) {
  ChainState st = make_chain(ctx, seed);
  return run_loop(st, sweeps, burn_in, obs, accumulate_density, false);
}

void coupled_sweep(ChainState& st) {
  if (!st.spins) throw std::invalid_argument("not a coupled chain");
  st.spins = sample_spins_given_complex(st.eng, st.open, st.rng);
  st.open = sample_complex_given_spins(st.eng, *st.spins, st.rng);
  st.cached_cluster = cluster_from_open(st.eng, st.open);
  assert(st.cache_ok());
}

RunResult run_coupled_chain(const Context& ctx, uint64_t sweeps,
                            uint64_t burn_in, uint64_t seed,
                            const std::vector<Observable>& obs,
                            bool accumulate_density) {
  ChainState st = make_coupled_chain(ctx, seed);
  return run_loop(st, sweeps, burn_in, obs, accumulate_density, true);
}

SpinConfig sample_spins_given_complex(const ClusterEngine& eng,
                                      const std::vector<uint8_t>& open,
                                      Rng& rng) {
  ModMatrix M = open_rows_matrix(eng, open);
  std::vector<int64_t> zero(M.rows, 0);
  return SpinConfig{uniform_solution_sample(M, zero, rng)};
}

std::vector<uint8_t> sample_complex_given_spins(const ClusterEngine& eng,
                                                const SpinConfig& f, Rng& rng) {
  std::vector<uint8_t> open(eng.n(), 0);
  for (int j = 0; j < eng.n(); ++j)
    if (coboundary_value(eng, f, j) == 0)
      open[j] = rng.bernoulli(eng.ctx.p) ? 1 : 0;
  return open;
}

int64_t coboundary_value(const ClusterEngine& eng, const SpinConfig& f,
                         int j) {
  const auto& col = eng.cols[j];
  if (f.f.size() != col.size())
    throw std::invalid_argument("spin assignment has the wrong domain");
  int64_t v = 0;
  for (size_t pos = 0; pos < col.size(); ++pos)
    v = (v + col[pos] * (f.f[pos] % eng.ctx.q)) % eng.ctx.q;
  return (v + eng.ctx.q) % eng.ctx.q;
}

long plgt_energy(const ClusterEngine& eng, const SpinConfig& f) {
  long sat = 0;
  for (int j = 0; j < eng.n(); ++j)
    if (coboundary_value(eng, f, j) == 0) ++sat;
  return -sat;
}

WilsonReport wilson_estimate(const Context& ctx,
                             const std::vector<std::pair<Cell, int>>& gamma,
                             uint64_t sweeps, uint64_t burn_in, uint64_t seed,
                             int enum_cap) {
  check_gamma_cycle(ctx, gamma);
  ChainState st = make_coupled_chain(ctx, seed);
  std::vector<int64_t> vg = gamma_vector(st.eng, gamma);
  if (sweeps <= burn_in)
    throw std::invalid_argument("sweeps must exceed burn_in");

  BatchAcc ind, chr, mem;
  const double tau = 2 * std::numbers::pi / double(ctx.q);
  for (uint64_t s = 0; s < sweeps; ++s) {
    coupled_sweep(st);
    ++st.sweep;
    if (s < burn_in) continue;
    int64_t val = 0;
    for (size_t pos = 0; pos < vg.size(); ++pos)
      val = (val + vg[pos] * st.spins->f[pos]) % ctx.q;
    ind.push(val == 0 ? 1.0 : 0.0);
    chr.push(std::cos(tau * double(val)));
    mem.push(howell_member(span_from_open(st.eng, st.open), vg) ? 1.0 : 0.0);
  }

  WilsonReport rep;
  rep.indicator = ind.finish();
  rep.character = chr.finish();
  rep.membership = mem.finish();

  if (st.n() <= enum_cap) {
    rep.enumerated = true;
    rep.certified_character = true;
    MeasureTable tab = table_from_engine(st.eng, enum_cap);
    Int null_sum = 0, ind_num = 0;
    for (uint64_t m = 0; m < tab.weights.size(); ++m) {
      std::vector<uint8_t> open(st.n(), 0);
      for (int j = 0; j < st.n(); ++j) open[j] = (m >> j & 1) ? 1 : 0;
      bool member = howell_member(span_from_open(st.eng, open), vg);
      // Distribution of f(gamma) over uniform satisfying spins: uniform on
      // the subgroup generated by the values on a kernel basis.
      int cols = st.eng.ambient.ncells(ctx.i - 1);
      std::vector<int> rows;
      for (int j = 0; j < st.n(); ++j)
        if (open[j]) rows.push_back(j);
      ModMatrix M(ctx.q, static_cast<int>(rows.size()), cols);
      for (size_t r = 0; r < rows.size(); ++r)
        for (int c = 0; c < cols; ++c)
          M.set(static_cast<int>(r), c, st.eng.cols[rows[r]][c]);
      HowellForm kern = kernel_mod(M).kernel;
      int64_t g = ctx.q;
      for (const auto& row : kern.rows) {
        int64_t v = 0;
        for (int c = 0; c < cols; ++c) v = (v + vg[c] * row[c]) % ctx.q;
        g = std::gcd(g, (v + ctx.q) % ctx.q);
      }
      bool char_null = g == ctx.q || ctx.q == 1;
      if (char_null != member) rep.certified_character = false;
      if (member) null_sum += tab.weights[m];
      ind_num += tab.weights[m] * g;
    }
    rep.exact_null = make_rat(null_sum, tab.total);
    rep.exact_indicator = make_rat(ind_num, tab.total * ctx.q);
  }
  return rep;
}

}  // namespace prcm
