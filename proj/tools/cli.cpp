#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "prcm/measure.hpp"
#include "prcm/sampler.hpp"

namespace prcm {
namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;
constexpr const char* kToolVersion = "1.0.0";

int env_threads() {
  const char* s = std::getenv("PRCM_THREADS");
  if (!s || !*s) return 1;
  long v = std::strtol(s, nullptr, 10);
  return static_cast<int>(std::clamp(v, 1L, 64L));
}

struct Opts {
  int d = 2;
  int i = 1;
  int64_t q = 2;
  std::string p = "1/2";
  std::string box = "0,1x0,1";
  std::string convention = "closed";
  std::string bc = "free";
  std::string bc_cells;
  std::string bc_file;
  std::string lo_bc = "free";
  std::string lo_bc_cells;
  std::string lo_bc_file;
  std::string lo_p;
  std::string inner_box;
  int64_t pinned_mask = -1;
  std::string gamma;
  std::string gamma_file;
  std::string observables = "open_fraction";
  uint64_t seed = 1;
  uint64_t sweeps = 100000;
  uint64_t burn_in = 1000;
  int chains = 1;
  int cap = 20;
  int samples = 200;
  bool density = false;
  std::string output = "-";
  std::string format = "json";
};

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// One cell per line in the lattice text form; blank lines and '#' comments
// are skipped.
std::string slurp_cell_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read cell file " + path);
  std::string line, joined;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    joined += ' ';
    joined += line;
  }
  return joined;
}

std::vector<Cell> parse_cells(const std::string& inline_spec,
                              const std::string& file) {
  std::string text = inline_spec;
  if (!file.empty()) text += slurp_cell_file(file);
  std::vector<Cell> cells;
  for (const std::string& tok : split_ws(text)) cells.push_back(parse_cell(tok));
  return cells;
}

// "0,2x0,2" -> primal box [0,2] x [0,2].
Box parse_box_spec(const std::string& spec, Convention conv) {
  std::vector<int> lo, hi;
  std::stringstream in(spec);
  std::string dim;
  while (std::getline(in, dim, 'x')) {
    auto comma = dim.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("box spec needs lo,hi per axis: " + spec);
    try {
      lo.push_back(std::stoi(dim.substr(0, comma)));
      hi.push_back(std::stoi(dim.substr(comma + 1)));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad box coordinate in " + spec);
    }
  }
  if (lo.empty()) throw std::invalid_argument("empty box spec");
  return Box::primal(std::move(lo), std::move(hi), conv);
}

Convention parse_convention(const std::string& s) {
  if (s == "closed") return Convention::Closed;
  if (s == "open") return Convention::Open;
  throw std::invalid_argument("convention must be open or closed, got " + s);
}

BoundaryCondition parse_bc(const std::string& kind,
                           const std::string& inline_cells,
                           const std::string& file) {
  std::vector<Cell> cells = parse_cells(inline_cells, file);
  if (kind == "free") {
    if (!cells.empty())
      throw std::invalid_argument("free boundary condition takes no cells");
    return BoundaryCondition::free_bc();
  }
  if (kind == "wired") {
    if (!cells.empty())
      throw std::invalid_argument("wired boundary condition takes no cells");
    return BoundaryCondition::wired();
  }
  if (kind == "plaquettes") return BoundaryCondition::plaquettes(cells);
  if (kind == "wired-at-infinity" || kind == "winf")
    return BoundaryCondition::wired_at_infinity(cells);
  throw std::invalid_argument("unknown boundary condition kind " + kind);
}

Context build_context(const Opts& o) {
  Context ctx;
  ctx.d = o.d;
  ctx.i = o.i;
  ctx.q = o.q;
  ctx.p = parse_rat(o.p);
  ctx.box = parse_box_spec(o.box, parse_convention(o.convention));
  ctx.bc = parse_bc(o.bc, o.bc_cells, o.bc_file);
  validate_context(ctx);
  return ctx;
}

// Signed cell list: whitespace-separated entries "cell", "+cell", "-cell",
// or "<int>*cell".
std::vector<std::pair<Cell, int>> parse_gamma_spec(const std::string& inline_spec,
                                                   const std::string& file) {
  std::string text = inline_spec;
  if (!file.empty()) text += slurp_cell_file(file);
  std::vector<std::pair<Cell, int>> gamma;
  for (const std::string& tok : split_ws(text)) {
    int coef = 1;
    std::string rest = tok;
    auto star = tok.find('*');
    if (star != std::string::npos) {
      try {
        coef = std::stoi(tok.substr(0, star));
      } catch (const std::exception&) {
        throw std::invalid_argument("bad gamma coefficient in " + tok);
      }
      rest = tok.substr(star + 1);
    } else if (tok[0] == '+') {
      rest = tok.substr(1);
    } else if (tok[0] == '-') {
      coef = -1;
      rest = tok.substr(1);
    }
    gamma.emplace_back(parse_cell(rest), coef);
  }
  if (gamma.empty()) throw std::invalid_argument("empty gamma spec");
  return gamma;
}

json box_json(const Box& b) {
  return json{{"lo_doubled", b.lo},
              {"hi_doubled", b.hi},
              {"convention", b.conv == Convention::Open ? "open" : "closed"}};
}

json config_json(const Opts& o, const std::string& cmd) {
  json bc = {{"kind", o.bc}};
  if (!o.bc_cells.empty()) bc["cells"] = o.bc_cells;
  if (!o.bc_file.empty()) bc["file"] = o.bc_file;
  json c = {{"subcommand", cmd},
            {"d", o.d},
            {"i", o.i},
            {"q", o.q},
            {"p", o.p},
            {"box", o.box},
            {"convention", o.convention},
            {"bc", bc},
            {"seed", o.seed},
            {"sweeps", o.sweeps},
            {"burn-in", o.burn_in},
            {"chains", o.chains},
            {"cap", o.cap},
            {"samples", o.samples},
            {"format", o.format},
            {"output", o.output}};
  if (!o.gamma.empty()) c["gamma"] = o.gamma;
  if (!o.gamma_file.empty()) c["gamma-file"] = o.gamma_file;
  if (!o.inner_box.empty()) c["inner-box"] = o.inner_box;
  if (o.pinned_mask >= 0) c["pinned-mask"] = o.pinned_mask;
  if (o.density) c["density"] = true;
  if (cmd == "verify-holley") {
    json lo = {{"kind", o.lo_bc}};
    if (!o.lo_bc_cells.empty()) lo["cells"] = o.lo_bc_cells;
    if (!o.lo_bc_file.empty()) lo["file"] = o.lo_bc_file;
    c["lo-bc"] = lo;
    c["lo-p"] = o.lo_p.empty() ? o.p : o.lo_p;
  }
  if (cmd == "sample" || cmd == "sample-coupled" || cmd == "estimate")
    c["observables"] = o.observables;
  return c;
}

std::string csv_escape(const std::string& s) {
  bool need = s.find_first_of(",\"\n") != std::string::npos ||
              (!s.empty() && (s.front() == ' ' || s.back() == ' '));
  if (!need) return s;
  std::string r = "\"";
  for (char ch : s) {
    if (ch == '"') r += '"';
    r += ch;
  }
  r += '"';
  return r;
}

struct Row {
  std::string observable, value, error;
};

int emit_report(const Opts& o, const std::string& cmd, const json& results,
                const std::vector<Row>& rows, std::ostream& out,
                std::ostream& err) {
  std::ostringstream body;
  if (o.format == "json") {
    json rep = {{"schema_version", kSchemaVersion},
                {"tool", {{"name", "prcm"}, {"version", kToolVersion}}},
                {"command", cmd},
                {"config", config_json(o, cmd)},
                {"results", results}};
    body << rep.dump(2) << "\n";
  } else if (o.format == "csv") {
    body << "schema_version,command,d,i,q,p,box,convention,bc,seed,"
            "observable,value,error\n";
    std::string bc = o.bc;
    for (const std::string& c : split_ws(o.bc_cells)) bc += " " + c;
    for (const Row& r : rows) {
      body << kSchemaVersion << ',' << cmd << ',' << o.d << ',' << o.i << ','
           << o.q << ',' << csv_escape(o.p) << ',' << csv_escape(o.box) << ','
           << o.convention << ',' << csv_escape(bc) << ',' << o.seed << ','
           << csv_escape(r.observable) << ',' << csv_escape(r.value) << ','
           << csv_escape(r.error) << "\n";
    }
  } else {
    throw std::invalid_argument("format must be json or csv, got " + o.format);
  }
  if (o.output == "-") {
    out << body.str();
  } else {
    std::ofstream f(o.output);
    if (!f) {
      err << "error: cannot write " << o.output << "\n";
      return 2;
    }
    f << body.str();
  }
  return 0;
}

json stats_json(const SampleStats& s) {
  return json{{"mean", s.mean},
              {"stderr", s.stderror},
              {"variance", s.variance},
              {"batches", s.batches},
              {"count", s.count}};
}

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::vector<Observable> build_observables(const Opts& o, bool coupled) {
  std::vector<Observable> obs;
  std::stringstream in(o.observables);
  std::string name;
  while (std::getline(in, name, ',')) {
    if (name.empty()) continue;
    if (name == "open_fraction") {
      obs.push_back({name, [](const ChainState& s) {
                       double k = 0;
                       for (auto b : s.open) k += b;
                       return k / s.n();
                     }});
    } else if (name == "open_count") {
      obs.push_back({name, [](const ChainState& s) {
                       double k = 0;
                       for (auto b : s.open) k += b;
                       return k;
                     }});
    } else if (name == "energy") {
      if (!coupled)
        throw std::invalid_argument("observable energy needs sample-coupled");
      obs.push_back({name, [](const ChainState& s) {
                       return double(plgt_energy(s.eng, *s.spins));
                     }});
    } else {
      throw std::invalid_argument("unknown observable " + name);
    }
  }
  if (obs.empty()) throw std::invalid_argument("empty observable list");
  return obs;
}

// Independent chains seeded by index, run on the worker pool, merged in
// index order regardless of scheduling.
std::vector<RunResult> run_chains(const Context& ctx, const Opts& o,
                                  const std::vector<Observable>& obs,
                                  bool coupled, bool density) {
  std::vector<RunResult> res(o.chains);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int k = next.fetch_add(1); k < o.chains; k = next.fetch_add(1)) {
      uint64_t s = chain_seed(o.seed, static_cast<uint64_t>(k));
      res[k] = coupled
                   ? run_coupled_chain(ctx, o.sweeps, o.burn_in, s, obs, density)
                   : run_chain(ctx, o.sweeps, o.burn_in, s, obs, density);
    }
  };
  int workers = std::min(env_threads(), o.chains);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return res;
}

json merged_stats(const std::vector<RunResult>& chains, size_t oi,
                  double* mean_out, double* err_out) {
  double mean = 0, var = 0;
  for (const RunResult& r : chains) {
    mean += r.stats[oi].mean;
    var += r.stats[oi].stderror * r.stats[oi].stderror;
  }
  mean /= chains.size();
  double se = std::sqrt(var) / chains.size();
  if (mean_out) *mean_out = mean;
  if (err_out) *err_out = se;
  return json{{"mean", mean}, {"stderr", se}, {"chains", chains.size()}};
}

int run_enumerate(const Opts& o, std::ostream& out, std::ostream& err) {
  Context ctx = build_context(o);
  MeasureTable tab = enumerate_measure(ctx, o.cap);
  json res;
  res["n"] = tab.n();
  res["pad"] = tab.pad;
  res["Z"] = rat_string(tab.Z);
  res["Y"] = rat_string(tab.Y);
  res["weight_total"] = tab.total.get_str();
  json cands = json::array(), margs = json::array();
  std::vector<Row> rows = {{"Z", rat_string(tab.Z), ""},
                           {"Y", rat_string(tab.Y), ""}};
  for (const Cell& c : tab.candidates) cands.push_back(format_cell(c));
  for (const Cell& c : tab.candidates) {
    Rat m = plaquette_marginal(tab, c);
    margs.push_back(json{{"cell", format_cell(c)}, {"probability", rat_string(m)}});
    rows.push_back({"marginal:" + format_cell(c), rat_string(m), ""});
  }
  res["candidates"] = cands;
  res["marginals"] = margs;
  if (tab.n() <= 12) {
    json table = json::array();
    for (uint64_t m = 0; m < tab.weights.size(); ++m)
      table.push_back(json{{"mask", m},
                           {"weight", tab.weights[m].get_str()},
                           {"probability", rat_string(tab.prob(m))}});
    res["table"] = table;
  }
  if (ctx.p > 0 && ctx.p < 1) {
    Pressure pr = pressure(ctx, o.cap);
    json coeff = json::array();
    for (const Int& c : pr.coeff) coeff.push_back(c.get_str());
    res["pressure"] = json{{"t", rat_string(pr.t)},
                           {"f", pr.f},
                           {"dfdpi", rat_string(pr.dfdpi)},
                           {"coefficients", coeff}};
    rows.push_back({"pressure:f", fmt_double(pr.f), ""});
    rows.push_back({"pressure:dfdpi", rat_string(pr.dfdpi), ""});
  }
  return emit_report(o, "enumerate", res, rows, out, err);
}

int run_verify_duality(const Opts& o, std::ostream& out, std::ostream& err) {
  Context ctx = build_context(o);
  Context dual = dual_context(ctx);
  int n = static_cast<int>(candidate_plaquettes(ctx).size());
  bool exact = n <= o.cap;
  DualityReport rep = exact ? verify_duality(ctx, o.cap)
                            : verify_duality_sampled(ctx, o.samples, o.seed);
  json res;
  res["ok"] = rep.ok;
  res["mode"] = exact ? "exact" : "sampled";
  res["p"] = rat_string(ctx.p);
  res["p_star"] = rat_string(dual.p);
  res["max_discrepancy"] = rat_string(rep.max_discrepancy);
  res["configs_checked"] = rep.configs;
  res["dual"] = json{{"d", dual.d},
                     {"i", dual.i},
                     {"q", dual.q},
                     {"bc", bc_name(dual.bc)},
                     {"box", box_json(dual.box)}};
  if (!rep.ok) res["witness"] = json{{"mask", rep.witness}};
  std::vector<Row> rows = {
      {"ok", rep.ok ? "1" : "0", ""},
      {"p_star", rat_string(dual.p), ""},
      {"max_discrepancy", rat_string(rep.max_discrepancy), ""},
      {"configs_checked", std::to_string(rep.configs), ""}};
  int code = emit_report(o, "verify-duality", res, rows, out, err);
  return code != 0 ? code : (rep.ok ? 0 : 1);
}

int run_verify_fkg(const Opts& o, std::ostream& out, std::ostream& err) {
  Context ctx = build_context(o);
  MeasureTable tab = enumerate_measure(ctx, o.cap);
  std::optional<PairWitness> w = fkg_violation(tab);
  uint64_t k = tab.weights.size();
  json res;
  res["ok"] = !w.has_value();
  res["configs"] = k;
  res["pairs_checked"] = k * (k + 1) / 2;
  if (w) res["witness"] = json{{"a", w->a}, {"b", w->b}};
  std::vector<Row> rows = {{"ok", w ? "0" : "1", ""},
                           {"pairs_checked", std::to_string(k * (k + 1) / 2), ""}};
  int code = emit_report(o, "verify-fkg", res, rows, out, err);
  return code != 0 ? code : (w ? 1 : 0);
}

int run_verify_holley(const Opts& o, std::ostream& out, std::ostream& err) {
  Context hi = build_context(o);
  Context lo = hi;
  lo.bc = parse_bc(o.lo_bc, o.lo_bc_cells, o.lo_bc_file);
  if (!o.lo_p.empty()) lo.p = parse_rat(o.lo_p);
  validate_context(lo);
  MeasureTable ht = enumerate_measure(hi, o.cap);
  MeasureTable lt = enumerate_measure(lo, o.cap);
  std::optional<PairWitness> w = holley_violation(ht, lt);
  json res;
  res["ok"] = !w.has_value();
  res["hi"] = json{{"bc", bc_name(hi.bc)}, {"p", rat_string(hi.p)}};
  res["lo"] = json{{"bc", bc_name(lo.bc)}, {"p", rat_string(lo.p)}};
  res["configs"] = ht.weights.size();
  if (w) res["witness"] = json{{"a", w->a}, {"b", w->b}};
  std::vector<Row> rows = {{"ok", w ? "0" : "1", ""}};
  int code = emit_report(o, "verify-holley", res, rows, out, err);
  return code != 0 ? code : (w ? 1 : 0);
}

int run_verify_conditioning(const Opts& o, std::ostream& out,
                            std::ostream& err) {
  Context outer = build_context(o);
  if (o.inner_box.empty())
    throw std::invalid_argument("verify-conditioning needs --inner-box");
  Box inner = parse_box_spec(o.inner_box, outer.box.conv);
  Context probe = outer;
  probe.box = inner;
  probe.bc = BoundaryCondition::free_bc();
  int k = static_cast<int>(candidate_plaquettes(outer).size()) -
          static_cast<int>(candidate_plaquettes(probe).size());
  if (k < 0) throw std::invalid_argument("inner box is not inside the outer box");
  std::vector<uint64_t> masks;
  if (o.pinned_mask >= 0) {
    masks.push_back(static_cast<uint64_t>(o.pinned_mask));
  } else {
    if (k > 16)
      throw std::invalid_argument(
          "exterior has " + std::to_string(k) +
          " cells; pass --pinned-mask to check a single pinning");
    for (uint64_t m = 0; m < (uint64_t{1} << k); ++m) masks.push_back(m);
  }
  json checked = json::array();
  bool ok = true;
  json witness;
  std::string branch;
  for (uint64_t m : masks) {
    ConditioningReport rep = verify_conditioning(outer, inner, m, o.cap);
    if (branch.empty()) branch = rep.detail;
    if (!rep.ok && ok) {
      ok = false;
      witness = json{{"pinned_mask", m},
                     {"config", rep.witness},
                     {"detail", rep.detail}};
    }
    checked.push_back(json{{"pinned_mask", m}, {"ok", rep.ok}});
  }
  json res;
  res["ok"] = ok;
  res["exterior_cells"] = k;
  res["branch"] = branch;
  res["masks_checked"] = masks.size();
  res["masks"] = checked;
  if (!ok) res["witness"] = witness;
  std::vector<Row> rows = {{"ok", ok ? "1" : "0", ""},
                           {"masks_checked", std::to_string(masks.size()), ""}};
  int code = emit_report(o, "verify-conditioning", res, rows, out, err);
  return code != 0 ? code : (ok ? 0 : 1);
}

int run_verify_coupling(const Opts& o, std::ostream& out, std::ostream& err) {
  Context ctx = build_context(o);
  if (ctx.bc.kind != BoundaryCondition::Kind::Free)
    throw std::invalid_argument("the coupling is defined for free boundary");
  ClusterEngine eng = make_engine(ctx);
  int n = eng.n();
  int n0 = eng.ambient.ncells(ctx.i - 1);
  if (n > o.cap)
    throw std::invalid_argument("refusing joint enumeration with " +
                                std::to_string(n) + " plaquettes");
  Int nf = int_pow(Int(ctx.q), static_cast<unsigned long>(n0));
  if (nf > (1 << 22))
    throw std::invalid_argument("refusing " + nf.get_str() + " spin states");
  int64_t fstates = nf.get_si();
  Int a = ctx.p.get_num(), b = ctx.p.get_den();

  // kappa(f, P) = a^|P| (b-a)^(n-|P|) [P satisfied by f], up to b^-n.
  std::vector<Int> marg_p(uint64_t{1} << n, Int(0));
  bool ok = true;
  json witness;
  uint64_t pairs = 0;
  for (int64_t code = 0; code < fstates && ok; ++code) {
    SpinConfig f{std::vector<int64_t>(n0)};
    int64_t c = code;
    for (int k = 0; k < n0; ++k) {
      f.f[k] = c % ctx.q;
      c /= ctx.q;
    }
    uint64_t sat = 0;
    for (int j = 0; j < n; ++j)
      if (coboundary_value(eng, f, j) == 0) sat |= uint64_t{1} << j;
    int s = std::popcount(sat);
    Int marg_f = 0;
    for (uint64_t m = sat;; m = (m - 1) & sat) {
      Int w = int_pow(a, static_cast<unsigned long>(std::popcount(m))) *
              int_pow(b - a, static_cast<unsigned long>(n - std::popcount(m)));
      marg_f += w;
      marg_p[m] += w;
      ++pairs;
      if (m == 0) break;
    }
    // Spin marginal must be the gauge Gibbs factor b^s (b-a)^(n-s).
    if (marg_f != int_pow(b, static_cast<unsigned long>(s)) *
                      int_pow(b - a, static_cast<unsigned long>(n - s))) {
      ok = false;
      witness = json{{"side", "spin"}, {"f_code", code}};
    }
  }
  if (ok) {
    MeasureTable tab = table_from_engine(eng, o.cap);
    for (uint64_t m = 0; m < marg_p.size(); ++m)
      if (marg_p[m] * tab.weights[0] != marg_p[0] * tab.weights[m]) {
        ok = false;
        witness = json{{"side", "plaquette"}, {"mask", m}};
        break;
      }
  }
  json res;
  res["ok"] = ok;
  res["spin_cells"] = n0;
  res["plaquettes"] = n;
  res["f_states"] = fstates;
  res["pairs_enumerated"] = pairs;
  if (!ok) res["witness"] = witness;
  std::vector<Row> rows = {{"ok", ok ? "1" : "0", ""},
                           {"pairs_enumerated", std::to_string(pairs), ""}};
  int code = emit_report(o, "verify-coupling", res, rows, out, err);
  return code != 0 ? code : (ok ? 0 : 1);
}

int run_verify_ep(const Opts& o, std::ostream& out, std::ostream& err) {
  Context ctx = build_context(o);
  EpReport rep = verify_ep(ctx, o.samples, o.seed);
  json res;
  res["ok"] = rep.ok;
  res["c"] = rep.c;
  res["configs_checked"] = rep.configs;
  if (!rep.ok) res["witness"] = json{{"mask", rep.witness}};
  std::vector<Row> rows = {{"ok", rep.ok ? "1" : "0", ""},
                           {"c", std::to_string(rep.c), ""},
                           {"configs_checked", std::to_string(rep.configs), ""}};
  int code = emit_report(o, "verify-ep", res, rows, out, err);
  return code != 0 ? code : (rep.ok ? 0 : 1);
}

int run_sample(const Opts& o, bool coupled, std::ostream& out,
               std::ostream& err) {
  Context ctx = build_context(o);
  std::vector<Observable> obs = build_observables(o, coupled);
  int n = static_cast<int>(candidate_plaquettes(ctx).size());
  bool density = o.density && n <= 20;
  std::vector<RunResult> chains = run_chains(ctx, o, obs, coupled, density);
  json res;
  res["sweeps"] = o.sweeps;
  res["burn_in"] = o.burn_in;
  res["sweeps_recorded"] = chains[0].sweeps_recorded;
  json jc = json::array();
  for (int k = 0; k < o.chains; ++k) {
    json stats = json::array();
    for (size_t oi = 0; oi < obs.size(); ++oi)
      stats.push_back(json{{"name", obs[oi].name},
                           {"stats", stats_json(chains[k].stats[oi])}});
    jc.push_back(json{{"chain", k},
                      {"seed", chain_seed(o.seed, static_cast<uint64_t>(k))},
                      {"observables", stats}});
  }
  res["chains"] = jc;
  std::vector<Row> rows;
  json merged = json::array();
  for (size_t oi = 0; oi < obs.size(); ++oi) {
    double mean = 0, se = 0;
    json m = merged_stats(chains, oi, &mean, &se);
    m["name"] = obs[oi].name;
    merged.push_back(m);
    rows.push_back({obs[oi].name, fmt_double(mean), fmt_double(se)});
    for (int k = 0; k < o.chains; ++k)
      rows.push_back({"chain" + std::to_string(k) + ":" + obs[oi].name,
                      fmt_double(chains[k].stats[oi].mean),
                      fmt_double(chains[k].stats[oi].stderror)});
  }
  res["merged"] = merged;
  if (density) {
    std::vector<double> dens(chains[0].density.size(), 0.0);
    for (const RunResult& r : chains)
      for (size_t m = 0; m < dens.size(); ++m) dens[m] += r.density[m];
    for (double& v : dens) v /= o.chains;
    res["density"] = dens;
    if (n <= o.cap) {
      MeasureTable tab = enumerate_measure(ctx, o.cap);
      double tv = 0;
      for (uint64_t m = 0; m < tab.weights.size(); ++m)
        tv += std::abs(dens[m] - rat_to_double(tab.prob(m)));
      res["tv_to_exact"] = tv / 2;
      rows.push_back({"tv_to_exact", fmt_double(tv / 2), ""});
    }
  }
  int code = emit_report(o, coupled ? "sample-coupled" : "sample", res, rows,
                         out, err);
  return code;
}

int run_estimate(const Opts& o, std::ostream& out, std::ostream& err) {
  Context ctx = build_context(o);
  std::vector<Observable> obs = build_observables(o, false);
  std::vector<RunResult> chains = run_chains(ctx, o, obs, false, false);
  json res;
  res["sweeps"] = o.sweeps;
  res["burn_in"] = o.burn_in;
  res["seed"] = o.seed;
  std::vector<Row> rows;
  json est = json::array();
  for (size_t oi = 0; oi < obs.size(); ++oi) {
    double mean = 0, se = 0;
    json m = merged_stats(chains, oi, &mean, &se);
    m["name"] = obs[oi].name;
    m["batches"] = chains[0].stats[oi].batches;
    m["count"] = chains[0].stats[oi].count;
    est.push_back(m);
    rows.push_back({obs[oi].name, fmt_double(mean), fmt_double(se)});
  }
  res["estimates"] = est;
  int n = static_cast<int>(candidate_plaquettes(ctx).size());
  if (n <= o.cap && ctx.p > 0 && ctx.p < 1) {
    Pressure pr = pressure(ctx, o.cap);
    res["pressure"] = json{{"f", pr.f},
                           {"dfdpi", rat_string(pr.dfdpi)},
                           {"t", rat_string(pr.t)}};
    res["density_exact"] = rat_string(pr.dfdpi);
    rows.push_back({"pressure:f", fmt_double(pr.f), ""});
    rows.push_back({"density_exact", rat_string(pr.dfdpi), ""});
  }
  bool ok = true;
  if (!o.gamma.empty() || !o.gamma_file.empty()) {
    auto gamma = parse_gamma_spec(o.gamma, o.gamma_file);
    WilsonReport w =
        wilson_estimate(ctx, gamma, o.sweeps, o.burn_in, o.seed, o.cap);
    json jw;
    jw["indicator"] = stats_json(w.indicator);
    jw["character"] = stats_json(w.character);
    jw["membership"] = stats_json(w.membership);
    jw["enumerated"] = w.enumerated;
    if (w.enumerated) {
      jw["certified_character"] = w.certified_character;
      jw["exact_null"] = rat_string(w.exact_null);
      jw["exact_indicator"] = rat_string(w.exact_indicator);
      rows.push_back({"wilson:exact_null", rat_string(w.exact_null), ""});
      if (!w.certified_character) ok = false;
    }
    res["wilson"] = jw;
    rows.push_back({"wilson:indicator", fmt_double(w.indicator.mean),
                    fmt_double(w.indicator.stderror)});
    rows.push_back({"wilson:character", fmt_double(w.character.mean),
                    fmt_double(w.character.stderror)});
    rows.push_back({"wilson:membership", fmt_double(w.membership.mean),
                    fmt_double(w.membership.stderror)});
  }
  res["ok"] = ok;
  int code = emit_report(o, "estimate", res, rows, out, err);
  return code != 0 ? code : (ok ? 0 : 1);
}

void add_common(CLI::App& app, Opts& o) {
  app.add_option("--d", o.d, "Ambient dimension");
  app.add_option("--i", o.i, "Plaquette dimension");
  app.add_option("--q", o.q, "Coefficient modulus");
  app.add_option("--p", o.p, "Open probability, rational a/b or decimal");
  app.add_option("--box", o.box, "Box extents lo,hi per axis: 0,2x0,2");
  app.add_option("--convention", o.convention, "Box convention: open|closed");
  app.add_option("--bc", o.bc,
                 "Boundary condition: free|wired|plaquettes|wired-at-infinity");
  app.add_option("--bc-cells", o.bc_cells,
                 "Inline boundary cells, whitespace separated");
  app.add_option("--bc-file", o.bc_file, "Boundary cell file, one per line");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--sweeps", o.sweeps, "Total sweeps per chain");
  app.add_option("--burn-in", o.burn_in, "Burn-in sweeps");
  app.add_option("--chains", o.chains, "Independent chains, merged in order")
      ->check(CLI::PositiveNumber);
  app.add_option("--cap", o.cap, "Enumeration cap on candidate count");
  app.add_option("--samples", o.samples, "Samples for sampled verifications");
  app.add_option("--lo-bc", o.lo_bc, "Dominated side bc (verify-holley)");
  app.add_option("--lo-bc-cells", o.lo_bc_cells, "Dominated side cells");
  app.add_option("--lo-bc-file", o.lo_bc_file, "Dominated side cell file");
  app.add_option("--lo-p", o.lo_p, "Dominated side p (verify-holley)");
  app.add_option("--inner-box", o.inner_box,
                 "Inner box for verify-conditioning");
  app.add_option("--pinned-mask", o.pinned_mask,
                 "Exterior pinning mask (default: sweep all)");
  app.add_option("--gamma", o.gamma, "Signed cell list for loop estimates");
  app.add_option("--gamma-file", o.gamma_file, "Signed cell list file");
  app.add_option("--observables", o.observables,
                 "Comma list: open_fraction,open_count,energy");
  app.add_flag("--density", o.density,
               "Accumulate the visited distribution (needs <= 20 plaquettes)");
  app.add_option("--output", o.output, "Report path, - for stdout");
  app.add_option("--format", o.format, "Report format: json|csv");
}

}  // namespace

int cli_run(std::vector<std::string> args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Plaquette random-cluster measures: exact tables, duality and"
               " lattice-condition verification, Markov chain estimates"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.set_config("--config", "", "Config file with flag=value lines");
  app.require_subcommand(1);
  Opts o;
  add_common(app, o);
  const char* subs[] = {"enumerate",        "verify-duality",
                        "verify-fkg",       "verify-holley",
                        "verify-conditioning", "verify-coupling",
                        "verify-ep",        "sample",
                        "sample-coupled",   "estimate"};
  const char* descr[] = {
      "Exact table, marginals, pressure",
      "Exact or sampled duality of the enumerated measures",
      "Lattice condition on all configuration pairs",
      "Cross lattice condition: hi context dominates --lo-* context",
      "Outer measure conditioned on a pinned exterior equals the inner bc",
      "Joint spin/plaquette enumeration: both marginals symbolically",
      "Configuration independence of the duality exponent",
      "Heat-bath chains",
      "Coupled spin/complex chains (free boundary)",
      "Density, pressure, loop estimators"};
  for (size_t k = 0; k < std::size(subs); ++k) {
    CLI::App* s = app.add_subcommand(subs[k], descr[k]);
    s->fallthrough();
  }
  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  std::string cmd = app.get_subcommands().at(0)->get_name();
  try {
    if (cmd == "enumerate") return run_enumerate(o, out, err);
    if (cmd == "verify-duality") return run_verify_duality(o, out, err);
    if (cmd == "verify-fkg") return run_verify_fkg(o, out, err);
    if (cmd == "verify-holley") return run_verify_holley(o, out, err);
    if (cmd == "verify-conditioning")
      return run_verify_conditioning(o, out, err);
    if (cmd == "verify-coupling") return run_verify_coupling(o, out, err);
    if (cmd == "verify-ep") return run_verify_ep(o, out, err);
    if (cmd == "sample") return run_sample(o, false, out, err);
    if (cmd == "sample-coupled") return run_sample(o, true, out, err);
    if (cmd == "estimate") return run_estimate(o, out, err);
    err << "error: unknown subcommand " << cmd << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    // Certification failures (no stabilization pad, divisibility breaks).
    err << "failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace prcm
