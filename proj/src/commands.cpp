#include "localsgd/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>

#include "localsgd/acceptance.hpp"
#include "localsgd/bounds.hpp"
#include "localsgd/csv.hpp"
#include "localsgd/engine.hpp"
#include "localsgd/errors.hpp"
#include "localsgd/estimators.hpp"
#include "localsgd/manifest.hpp"
#include "localsgd/oracles.hpp"
#include "localsgd/parallel.hpp"
#include "localsgd/scaling.hpp"
#include "localsgd/sde.hpp"

namespace localsgd {

namespace fs = std::filesystem;

std::string_view to_string(ParamType t) {
  switch (t) {
    case ParamType::boolean: return "bool";
    case ParamType::integer: return "int";
    case ParamType::real: return "float";
    case ParamType::text: return "string";
    case ParamType::int_list: return "int list";
    case ParamType::real_list: return "float list";
  }
  return "?";
}

const ParamSpec* CommandInfo::param(std::string_view n) const {
  for (const auto& p : params)
    if (p.name == n) return &p;
  return nullptr;
}

std::string CommandInfo::help() const {
  std::ostringstream os;
  os << name << ": " << summary << "\n";
  os << "  verifies:";
  for (const auto& a : anchors) os << " " << a << (&a == &anchors.back() ? "" : ",");
  os << "\n";
  if (!params.empty()) os << "  parameters (key=value):\n";
  for (const auto& p : params) {
    os << "    " << p.name << " (" << to_string(p.type) << ", default " << format_config_value(p.default_value)
       << ")";
    if (!p.doc.empty()) os << "  " << p.doc;
    os << "\n";
  }
  return os.str();
}

namespace {

ParamSpec real(std::string name, double v, std::string doc = {}) {
  return {std::move(name), ParamType::real, v, std::move(doc)};
}
ParamSpec integer(std::string name, std::int64_t v, std::string doc = {}) {
  return {std::move(name), ParamType::integer, v, std::move(doc)};
}
ParamSpec text(std::string name, std::string v, std::string doc = {}) {
  return {std::move(name), ParamType::text, std::move(v), std::move(doc)};
}
ParamSpec flag(std::string name, bool v, std::string doc = {}) {
  return {std::move(name), ParamType::boolean, v, std::move(doc)};
}
ParamSpec ints(std::string name, std::string v, std::string doc = {}) {
  return {std::move(name), ParamType::int_list, std::move(v), std::move(doc)};
}
ParamSpec reals(std::string name, std::string v, std::string doc = {}) {
  return {std::move(name), ParamType::real_list, std::move(v), std::move(doc)};
}

std::vector<ParamSpec> objective_params(std::string kind, double H, double h_left, double sigma) {
  return {text("objective", std::move(kind), "piecewise | quadratic | logcosh"),
          real("H", H, "curvature (right branch for piecewise)"),
          real("h_left", h_left, "left curvature, piecewise only"),
          real("Q", 0.5, "third-order constant, logcosh only"),
          real("sigma", sigma, "Gaussian noise standard deviation")};
}

std::vector<CommandInfo> build_registry() {
  std::vector<CommandInfo> r;
  r.push_back({"bias-scan",
               "SGD iterate densities on the two-curvature quadratic; checks that the mean drifts left",
               {"Fig. 1"},
               {real("H", 2.0, "right curvature"), real("h_left", 0.2), real("sigma", 0.1), real("eta", 0.01),
                real("x0", 0.0), ints("checkpoints", "128,256,512,1024"), integer("n", 65536),
                integer("bins", 200), real("lo", -0.6), real("hi", 0.6), real("z", 2.0, "gap must exceed z stderr")}});

  auto density = objective_params("piecewise", 1.0, 0.5, 1.0);
  for (auto p : {real("eta", 0.01), real("x0", 0.0)}) density.push_back(p);
  for (auto p : {ints("checkpoints", "16,64,256"), integer("n", 100000), integer("bins", 100),
                 real("lo", 0.0, "lo = hi selects +-6 predicted sd"), real("hi", 0.0)})
    density.push_back(p);
  r.push_back({"density", "histograms and means of the SGD iterate at chosen step counts", {"Fig. 1", "Def. 2.1"},
               density});

  auto fed = objective_params("piecewise", 1.0, 0.5, 1.0);
  for (auto p : {real("zeta_star", 0.0, "> 0 uses the deterministic heterogeneous pair"), integer("M", 4),
                 integer("K", 8), integer("R", 16), real("eta", 0.01), real("x0", 1.0), integer("n", 10000),
                 text("metric", "value_gap", "value_gap | grad_sq | final_iterate"),
                 text("mode", "plain", "plain | antithetic")})
    fed.push_back(p);
  r.push_back({"fedavg-run", "Monte-Carlo error of local SGD / FedAvg (Alg. 1) with M clients and K local steps per round",
               {"Alg. 1"}, fed});

  r.push_back({"lowerbound-suite",
               "final-iterate value gap of FedAvg on the three-coordinate hard instance against the lower bound",
               {"Thm 3.1", "Thm 3.4", "Thm B.1", "Lemma B.3", "Lemma B.6"},
               {real("H", 1.0), real("sigma", 1.0), real("zeta_star", 0.0), real("D", 1.0), integer("M", 2),
                integer("K", 16), integer("R", 8), reals("etas", "0.01,0.03,0.1,0.3", "step sizes, each <= 1/H"),
                integer("n", 20000)}});

  auto sde = objective_params("logcosh", 1.0, 0.5, 1.0);
  for (auto p : {real("x", 0.0), real("eta", 0.1), reals("t_grid", "0.05,0.1,0.15,0.2"), real("dt", 0.01),
                 integer("n", 1000000), flag("antithetic", true), flag("cubic_nuisance", true),
                 text("convention", "unhalved", "unhalved | ito"),
                 real("tolerance", 0.10, "relative tolerance on u_tt")})
    sde.push_back(p);
  r.push_back({"sde-check", "fits u_t and u_tt of the diffusion approximation by Euler-Maruyama simulation",
               {"Lemma 2.8"}, sde});

  auto rate = objective_params("piecewise", 1.0, 0.5, 1.0);
  for (auto p : {text("axis", "k", "k | eta"), reals("grid", "", "empty selects 16,32,64,128 or 0.002,0.004,0.008"),
                 real("fixed", 0.0, "eta for a k sweep, k for an eta sweep; 0 selects 0.002 or 32"),
                 real("x0", 0.0), integer("n", 1000000),
                 real("lo", 0.0, "exponent window; lo = hi selects the default window"), real("hi", 0.0)})
    rate.push_back(p);
  r.push_back({"rate-fit", "power-law fit of the iterate bias against k or eta",
               {"Thm 2.2", "Thm 2.3", "Thm 2.5", "Thm 2.6"}, rate});

  std::vector<ParamSpec> inputs{real("H", 1.0),         real("sigma", 1.0), real("Q", 0.5),  real("G", 1.0),
                                real("D", 1.0),         real("B", 1.0),     real("zeta_star", 0.0),
                                real("zeta", 0.0),      integer("M", 8),    integer("K", 16), integer("R", 64)};
  r.push_back({"bounds-eval", "evaluates the lower and upper rate bounds and the prescribed step sizes",
               {"Table 1", "Thm 3.1", "Thm 3.4", "Thm C.1", "Thm D.2", "Thm D.4"}, inputs});

  r.push_back({"verify-upper",
               "measures E|grad F|^2 of FedAvg at a prescribed step size and compares with the rate bound",
               {"Thm C.1", "Thm D.2", "Thm D.4"},
               {text("theorem", "convex3o", "convex3o | nonconvex3o | nonconvex2o"), real("H", 1.0), real("Q", 0.5),
                real("sigma", 1.0), integer("M", 8), integer("K", 16), integer("R", 64), real("x0", 1.0),
                integer("n", 2000), real("slack", kDefaultSlack)}});

  r.push_back({"oracle-grid", "closed-form oracle tables for comparator scales; sigma gap; round map; quadratic law",
               {"Lemma B.2", "Lemma B.6", "App. B.2"},
               {real("L", 1.0), real("sigma", 1.0), real("eta_min", 1e-3), real("eta_max", 1.0 / 6.0),
                integer("eta_count", 40), integer("k_max", 256), reals("hetero_etas", "0.01,0.05,0.1,0.2,0.5"),
                ints("hetero_K", "1,2,4,8,16,32"), ints("quad_t", "1,2,5,10,20")}});

  r.push_back({"acceptance", "runs the acceptance criteria and writes one verdict line per criterion",
               {"Fig. 1", "Thm A.1", "Thm A.2", "Lemma B.3", "Lemma B.6", "Lemma 2.8", "Thm C.1", "Thm D.2"},
               {text("profile", "full", "quick | full"), flag("determinism", true, "rerun at a second worker count")}});
  return r;
}

double get_real(const ParamMap& p, const std::string& k) {
  const auto& v = p.at(k);
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}
std::int64_t get_int(const ParamMap& p, const std::string& k) { return std::get<std::int64_t>(p.at(k)); }
bool get_bool(const ParamMap& p, const std::string& k) { return std::get<bool>(p.at(k)); }
const std::string& get_text(const ParamMap& p, const std::string& k) { return std::get<std::string>(p.at(k)); }

std::uint64_t get_count(const ParamMap& p, const std::string& k) {
  const auto v = get_int(p, k);
  if (v < 1) throw InvalidParameter(k + " must be at least 1");
  return static_cast<std::uint64_t>(v);
}
int get_small(const ParamMap& p, const std::string& k) {
  const auto v = get_int(p, k);
  if (v < 1 || v > (1 << 24)) throw InvalidParameter(k + " must be in [1, 2^24]");
  return static_cast<int>(v);
}

Objective1D objective_from(const ParamMap& p) {
  const auto& kind = get_text(p, "objective");
  const double H = get_real(p, "H"), sigma = get_real(p, "sigma");
  if (kind == "piecewise") return make_piecewise_quadratic(H, get_real(p, "h_left"), sigma);
  if (kind == "quadratic") return make_quadratic(H, sigma);
  if (kind == "logcosh") return make_logcosh_instance(H, get_real(p, "Q"), sigma);
  throw InvalidParameter("objective must be piecewise, quadratic or logcosh, got '" + kind + "'");
}

// Experiment id from the command name so keys never depend on registry order.
std::uint64_t experiment_id(std::string_view name) {
  const auto h = sha256_hex(name);
  std::uint64_t id = 0;
  std::from_chars(h.data(), h.data() + 16, id, 16);
  return id;
}

struct Sink {
  fs::path dir;
  std::vector<std::string> files;
  std::ostream& out;

  void put(const std::string& name, const std::string& content) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw InvalidParameter("cannot write " + (dir / name).string());
    f << content;
    if (!f) throw InvalidParameter("write failed: " + (dir / name).string());
    files.push_back(name);
  }
};

struct Env {
  const ParamMap& p;
  RngKey key;
  unsigned workers;
  bool paper_literal;
  Sink& sink;
};

std::string num(double v) { return format_double(v); }

void density_outputs(Env& e, const DensityResult& d, std::string_view label, double eta) {
  CsvTable hist({"checkpoint", "bin_lo", "bin_hi", "count", "outside"});
  for (std::size_t i = 0; i < d.checkpoints.size(); ++i) {
    const auto& h = d.histograms[i];
    const auto edges = h.edges();
    for (std::size_t b = 0; b < h.bins(); ++b)
      hist.add_row({d.checkpoints[i], edges[b], edges[b + 1], h.counts()[b], h.outside()});
  }
  auto means = estimate_table();
  for (std::size_t i = 0; i < d.checkpoints.size(); ++i)
    add_estimate_row(means, "mean", label, eta, d.checkpoints[i], 1, 1, 1, EstimatorMode::plain, d.means[i]);
  for (std::size_t i = 0; i < d.gaps.size(); ++i)
    add_estimate_row(means, "gap", label, eta, d.checkpoints[i + 1], 1, 1, 1, EstimatorMode::plain, d.gaps[i]);
  e.sink.put("density.csv", hist.str());
  e.sink.put("means.csv", means.str());
}

bool cmd_bias_scan(Env& e) {
  const auto& p = e.p;
  const auto obj = make_piecewise_quadratic(get_real(p, "H"), get_real(p, "h_left"), get_real(p, "sigma"));
  const double eta = get_real(p, "eta");
  const auto d = estimate_density(obj, get_real(p, "x0"), eta, parse_int_list(get_text(p, "checkpoints")),
                                  get_count(p, "n"), get_count(p, "bins"), get_real(p, "lo"), get_real(p, "hi"),
                                  e.key, e.workers);
  density_outputs(e, d, obj.name(), eta);
  const double z = get_real(p, "z");
  bool ok = d.means.back().ci_hi < 0.0;
  for (std::size_t i = 0; i < d.gaps.size(); ++i)
    ok = ok && d.means[i + 1].mean < d.means[i].mean && d.gaps[i].mean < -z * d.gaps[i].std_error;
  e.sink.out << (ok ? "PASS" : "FAIL") << " bias-scan: means";
  for (const auto& m : d.means) e.sink.out << " " << num(m.mean);
  e.sink.out << " strictly decreasing with final mean < 0 and gaps beyond " << z << " stderr: "
             << (ok ? "yes" : "no") << "\n";
  return ok;
}

bool cmd_density(Env& e) {
  const auto& p = e.p;
  const auto obj = objective_from(p);
  const double eta = get_real(p, "eta"), x0 = get_real(p, "x0");
  const auto cps = parse_int_list(get_text(p, "checkpoints"));
  double lo = get_real(p, "lo"), hi = get_real(p, "hi");
  if (lo == hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (auto k : cps) {
      const auto [a, b] = default_density_range(obj, x0, eta, k);
      lo = std::min(lo, a);
      hi = std::max(hi, b);
    }
  }
  const auto d = estimate_density(obj, x0, eta, cps, get_count(p, "n"), get_count(p, "bins"), lo, hi, e.key,
                                  e.workers);
  density_outputs(e, d, obj.name(), eta);
  e.sink.out << "density: " << cps.size() << " checkpoints on [" << num(lo) << ", " << num(hi) << "]\n";
  return true;
}

bool cmd_fedavg_run(Env& e) {
  const auto& p = e.p;
  FedAvgConfig cfg;
  cfg.eta = get_real(p, "eta");
  cfg.K = get_small(p, "K");
  cfg.R = get_small(p, "R");
  cfg.M = get_small(p, "M");
  cfg.x0 = {get_real(p, "x0")};
  const double zeta = get_real(p, "zeta_star");
  const auto clients = zeta > 0.0 ? alternate_clients(make_hetero_pair(get_real(p, "H"), zeta), cfg.M)
                                  : homogeneous_clients(objective_from(p), cfg.M);
  const auto metric = parse_fedavg_metric(get_text(p, "metric"));
  const auto mode = parse_estimator_mode(get_text(p, "mode"));
  const auto est = fedavg_error(clients, cfg, get_count(p, "n"), e.key, metric, mode, e.workers);
  auto t = estimate_table();
  add_estimate_row(t, to_string(metric), clients.front().objective.name(), cfg.eta,
                   static_cast<std::int64_t>(cfg.K) * cfg.R, cfg.K, cfg.R, cfg.M, mode, est);
  e.sink.put("fedavg.csv", t.str());

  const auto one = run_fedavg(clients, cfg, e.key.with_replica(0), CheckpointPolicy::full);
  CsvTable traj({"round", "x"});
  for (const auto& c : one.round_starts.checkpoints) traj.add_row({c.step, c.value});
  e.sink.put("trajectory.csv", traj.str());
  e.sink.out << "fedavg-run: " << to_string(metric) << " = " << num(est.mean) << " +- "
             << num(est.std_error) << "\n";
  return true;
}

bool cmd_lowerbound_suite(Env& e) {
  const auto& p = e.p;
  RateInputs in;
  in.H = get_real(p, "H");
  in.sigma = get_real(p, "sigma");
  in.zeta_star = get_real(p, "zeta_star");
  in.D = get_real(p, "D");
  in.M = get_small(p, "M");
  in.K = get_small(p, "K");
  in.R = get_small(p, "R");
  in.validate();
  const auto bound = in.zeta_star > 0.0 ? lower_bound_hetero(in) : lower_bound_homog(in);
  auto bt = bound_table();
  add_bound_rows(bt, bound);
  e.sink.put("bounds.csv", bt.str());

  const double mu = lowerbound_mu(in.H, in.sigma, in.zeta_star, in.D, in.K, in.R);
  const auto inst = make_lowerbound_composite(in.H, mu, in.sigma, in.zeta_star, in.D);
  CsvTable t({"eta", "value_gap", "stderr", "lower_bound", "ratio"});
  double worst = std::numeric_limits<double>::infinity();
  const auto etas = parse_real_list(get_text(p, "etas"));
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!(etas[i] > 0.0 && etas[i] <= 1.0 / in.H))
      throw OutOfRegime("eta <= 1/H (eta=" + num(etas[i]) + ", H=" + num(in.H) + ")");
    FedAvgConfig cfg{etas[i], in.K, in.R, in.M, inst.x0};
    const auto gap = composite_value_gap(inst, cfg, get_count(p, "n"), e.key.with_round(static_cast<std::uint32_t>(i)),
                                         e.workers);
    const double ratio = gap.mean / bound.total;
    worst = std::min(worst, ratio);
    t.add_row({etas[i], gap.mean, gap.std_error, bound.total, ratio});
  }
  e.sink.put("lowerbound.csv", t.str());
  e.sink.out << bound.theorem << ": bound " << num(bound.total) << ", smallest measured/bound over " << etas.size()
             << " step sizes " << num(worst) << "\n";
  return true;
}

bool cmd_sde_check(Env& e) {
  const auto& p = e.p;
  const auto obj = objective_from(p);
  BackwardOptions opts;
  opts.dt = get_real(p, "dt");
  opts.antithetic = get_bool(p, "antithetic");
  opts.cubic_nuisance = get_bool(p, "cubic_nuisance");
  opts.convention = parse_diffusion_convention(get_text(p, "convention"));
  opts.workers = e.workers;
  const double tol = get_real(p, "tolerance");
  const auto b = check_backward_expansion(obj, get_real(p, "x"), get_real(p, "eta"),
                                          parse_real_list(get_text(p, "t_grid")), get_count(p, "n"), e.key, opts);
  e.sink.put("backward.csv", backward_table(b).str());
  const double pred = b.predicted.u_tt;
  const bool ok = pred == 0.0 ? b.u_tt.within(0.0, 4.0) : std::fabs(b.u_tt.mean - pred) <= tol * std::fabs(pred);
  e.sink.out << backward_summary(b);
  e.sink.out << (ok ? "PASS" : "FAIL") << " sde-check: u_tt=" << num(b.u_tt.mean) << " predicted " << num(pred)
             << " (" << to_string(opts.convention) << ")\n";
  return ok;
}

bool cmd_rate_fit(Env& e) {
  const auto& p = e.p;
  const auto obj = objective_from(p);
  SweepSpec s;
  s.axis = parse_sweep_axis(get_text(p, "axis"));
  const bool on_k = s.axis == SweepAxis::k;
  s.grid = get_text(p, "grid").empty() ? (on_k ? std::vector<double>{16, 32, 64, 128}
                                               : std::vector<double>{0.002, 0.004, 0.008})
                                       : parse_real_list(get_text(p, "grid"));
  s.fixed = get_real(p, "fixed") != 0.0 ? get_real(p, "fixed") : (on_k ? 0.002 : 32.0);
  s.x0 = get_real(p, "x0");
  s.n = get_count(p, "n");
  const auto res = sweep_bias_scaling(obj, s, e.key, e.workers);
  e.sink.put("sweep.csv", sweep_table(res, s.axis).str());
  double lo = get_real(p, "lo"), hi = get_real(p, "hi");
  if (lo == hi) {
    const double mid = res.expected, half = res.order == BiasOrder::second ? 0.15 : 0.2;
    lo = mid - half;
    hi = mid + half;
  }
  const bool ok = res.fit.exponent >= lo && res.fit.exponent <= hi;
  e.sink.out << fit_summary(res, s.axis);
  e.sink.out << (ok ? "PASS" : "FAIL") << " rate-fit: exponent " << num(res.fit.exponent) << " in [" << num(lo)
             << ", " << num(hi) << "]\n";
  return ok;
}

RateInputs rate_inputs(const ParamMap& p) {
  RateInputs in;
  in.H = get_real(p, "H");
  in.sigma = get_real(p, "sigma");
  in.Q = get_real(p, "Q");
  in.G = get_real(p, "G");
  in.D = get_real(p, "D");
  in.B = get_real(p, "B");
  in.zeta_star = get_real(p, "zeta_star");
  in.zeta = get_real(p, "zeta");
  in.M = get_small(p, "M");
  in.K = get_small(p, "K");
  in.R = get_small(p, "R");
  in.validate();
  return in;
}

bool cmd_bounds_eval(Env& e) {
  const auto in = rate_inputs(e.p);
  auto t = bound_table();
  auto add = [&](auto&& fn) {
    try {
      add_bound_rows(t, fn());
    } catch (const OutOfRegime& err) {
      e.sink.out << "skipped: " << err.what() << "\n";
    }
  };
  add([&] { return lower_bound_homog(in); });
  add([&] { return lower_bound_hetero(in); });
  add([&] { return upper_bound_uniform(in); });
  for (auto th : {UpperTheorem::convex3o, UpperTheorem::nonconvex3o, UpperTheorem::nonconvex2o})
    add([&] { return stepsize_and_rate(th, in); });
  e.sink.put("bounds.csv", t.str());
  e.sink.out << "bounds-eval: " << t.rows() << " rows\n";
  return true;
}

bool cmd_verify_upper(Env& e) {
  const auto& p = e.p;
  const double H = get_real(p, "H"), Q = get_real(p, "Q"), sigma = get_real(p, "sigma"), x0 = get_real(p, "x0");
  const auto obj = make_logcosh_instance(H, Q, sigma);
  RateInputs in;
  in.H = H, in.Q = Q, in.sigma = sigma;
  in.B = obj.value(x0) - obj.value(obj.x_star());
  in.G = std::fabs(obj.mean_grad(x0));
  in.D = std::fabs(x0 - obj.x_star());
  in.M = get_small(p, "M");
  in.K = get_small(p, "K");
  in.R = get_small(p, "R");
  const auto th = parse_upper_theorem(get_text(p, "theorem"));
  const auto v = verify_upper_bound(homogeneous_clients(obj, in.M), in, x0, get_count(p, "n"), e.key, th,
                                    get_real(p, "slack"), e.workers);
  CsvTable t({"theorem", "eta", "measured", "stderr", "bound", "C", "pass"});
  t.add_row({to_string(th), v.eta, v.measured.mean, v.measured.std_error, v.bound, v.slack, v.pass});
  e.sink.put("verify.csv", t.str());
  auto bt = bound_table();
  add_bound_rows(bt, stepsize_and_rate(th, in));
  e.sink.put("bounds.csv", bt.str());
  e.sink.out << v.verdict_line() << "\n";
  return v.pass;
}

bool cmd_oracle_grid(Env& e) {
  const auto& p = e.p;
  const double L = get_real(p, "L"), sigma = get_real(p, "sigma");
  const double lo = get_real(p, "eta_min"), hi = get_real(p, "eta_max");
  const auto count = get_count(p, "eta_count");
  const auto kmax = get_int(p, "k_max");
  if (!(lo > 0.0 && hi >= lo)) throw InvalidParameter("oracle-grid: need 0 < eta_min <= eta_max");
  if (kmax < 2) throw InvalidParameter("oracle-grid: k_max must be at least 2");

  CsvTable ks({"eta", "k", "alpha_y", "alpha_z", "sigma_y", "sigma_z", "sigma_gap", "sigma_gap_lower", "holds"});
  std::uint64_t fails = 0, total = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    const double eta = i + 1 == count ? hi : lo * std::pow(hi / lo, count > 1 ? double(i) / double(count - 1) : 0.0);
    for (std::int64_t k = 2; k <= kmax; ++k) {
      const auto s = key_scales(eta, L, k);
      const double gap = sigma * (s.sigma_y - s.sigma_z);
      const double bound = sigma_gap_lower(eta, L, sigma, k);
      fails += gap < bound;
      ++total;
      ks.add_row({eta, k, s.alpha_y, s.alpha_z, s.sigma_y, s.sigma_z, gap, bound, gap >= bound});
    }
  }
  e.sink.put("key_scales.csv", ks.str());

  std::vector<std::string> hh{"eta", "K", "a", "b"};
  if (e.paper_literal) hh.push_back("b_literal");
  CsvTable hm(hh);
  for (double eta : parse_real_list(get_text(p, "hetero_etas")))
    for (auto K : parse_int_list(get_text(p, "hetero_K"))) {
      const auto m = hetero_round_map(L, eta, K);
      std::vector<CsvField> row{eta, K, m.a, m.b};
      if (e.paper_literal) row.emplace_back(hetero_round_map_literal(L, eta, K).b);
      hm.add_row(row);
    }
  e.sink.put("hetero_map.csv", hm.str());

  std::vector<std::string> qh{"eta", "t", "mean", "variance"};
  if (e.paper_literal) qh.push_back("variance_literal");
  CsvTable qd(qh);
  for (double eta : parse_real_list(get_text(p, "hetero_etas")))
    for (auto t : parse_int_list(get_text(p, "quad_t"))) {
      if (eta * L >= 1.0) continue;
      const auto d = quad_sgd_distribution(L, sigma, eta, 1.0, t);
      std::vector<CsvField> row{eta, t, d.mean, d.variance};
      if (e.paper_literal) row.emplace_back(quad_sgd_distribution_literal(L, sigma, eta, 1.0, t).variance);
      qd.add_row(row);
    }
  e.sink.put("quadratic_law.csv", qd.str());
  e.sink.out << "oracle-grid: sigma gap below its lower bound at " << fails << "/" << total << " points\n";
  return true;
}

bool cmd_acceptance(Env& e) {
  AcceptanceOptions opts;
  opts.profile = parse_profile(get_text(e.p, "profile"));
  opts.master_seed = e.key.master_seed;
  opts.workers = e.workers;
  opts.check_determinism = get_bool(e.p, "determinism");
  const auto report = acceptance_suite(opts, &e.sink.out);
  for (const auto& c : report.criteria)
    for (const auto& csv : c.csvs) e.sink.put(csv.file, csv.content);
  e.sink.put("verdicts.txt", report.verdict_text());
  return report.all_pass();
}

using Handler = std::function<bool(Env&)>;

const std::map<std::string, Handler, std::less<>>& handlers() {
  static const std::map<std::string, Handler, std::less<>> h{
      {"bias-scan", cmd_bias_scan},       {"density", cmd_density},         {"fedavg-run", cmd_fedavg_run},
      {"lowerbound-suite", cmd_lowerbound_suite}, {"sde-check", cmd_sde_check}, {"rate-fit", cmd_rate_fit},
      {"bounds-eval", cmd_bounds_eval},   {"verify-upper", cmd_verify_upper}, {"oracle-grid", cmd_oracle_grid},
      {"acceptance", cmd_acceptance}};
  return h;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
std::vector<T> parse_list(std::string_view text, const char* what) {
  std::vector<T> out;
  if (trim(text).empty()) return out;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = text.find(',', pos);
    const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    T v{};
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || end != item.data() + item.size())
      throw InvalidParameter(std::string("bad ") + what + " list item '" + item + "'");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

const std::vector<CommandInfo>& command_registry() {
  static const std::vector<CommandInfo> r = build_registry();
  return r;
}

const CommandInfo& find_command(std::string_view name) {
  for (const auto& c : command_registry())
    if (c.name == name) return c;
  std::string known;
  for (const auto& c : command_registry()) known += (known.empty() ? "" : ", ") + c.name;
  throw InvalidParameter("unknown command '" + std::string(name) + "' (known: " + known + ")");
}

std::string list_commands_text() {
  CsvTable t({"command", "anchors", "summary"});
  for (const auto& c : command_registry()) {
    std::string a;
    for (const auto& x : c.anchors) a += (a.empty() ? "" : "; ") + x;
    t.add_row({c.name, a, c.summary});
  }
  return t.str();
}

std::vector<std::int64_t> parse_int_list(std::string_view text) { return parse_list<std::int64_t>(text, "integer"); }
std::vector<double> parse_real_list(std::string_view text) { return parse_list<double>(text, "float"); }

ParamMap resolve_params(const CommandInfo& info, const ParamMap& given) {
  ParamMap out;
  for (const auto& [k, v] : given) {
    const auto* spec = info.param(k);
    if (!spec) throw InvalidParameter(info.name + ": unknown parameter '" + k + "'");
    auto mismatch = [&] {
      return InvalidParameter(info.name + ": parameter '" + k + "' expects " + std::string(to_string(spec->type)) +
                              ", got " + std::string(type_name(v)));
    };
    switch (spec->type) {
      case ParamType::boolean:
        if (!std::holds_alternative<bool>(v)) throw mismatch();
        out[k] = v;
        break;
      case ParamType::integer:
        if (!std::holds_alternative<std::int64_t>(v)) throw mismatch();
        out[k] = v;
        break;
      case ParamType::real:
        if (const auto* i = std::get_if<std::int64_t>(&v))
          out[k] = static_cast<double>(*i);
        else if (std::holds_alternative<double>(v))
          out[k] = v;
        else
          throw mismatch();
        break;
      case ParamType::text:
        if (!std::holds_alternative<std::string>(v)) throw mismatch();
        out[k] = v;
        break;
      case ParamType::int_list:
      case ParamType::real_list:
        if (const auto* s = std::get_if<std::string>(&v)) {
          if (spec->type == ParamType::int_list)
            parse_int_list(*s);
          else
            parse_real_list(*s);
          out[k] = v;
        } else if (std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v)) {
          // a single number is a one-element list
          out[k] = format_config_value(v);
          if (spec->type == ParamType::int_list) parse_int_list(std::get<std::string>(out[k]));
        } else {
          throw mismatch();
        }
        break;
    }
  }
  for (const auto& spec : info.params)
    if (!out.count(spec.name)) out[spec.name] = spec.default_value;
  return out;
}

std::pair<std::string, ConfigValue> parse_override(const CommandInfo& info, std::string_view s) {
  const auto eq = s.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw InvalidParameter("expected key=value, got '" + std::string(s) + "'");
  const auto key = trim(s.substr(0, eq));
  const auto val = trim(s.substr(eq + 1));
  const auto* spec = info.param(key);
  if (!spec) throw InvalidParameter(info.name + ": unknown parameter '" + key + "'");
  switch (spec->type) {
    case ParamType::boolean:
      if (val == "true" || val == "1") return {key, true};
      if (val == "false" || val == "0") return {key, false};
      throw InvalidParameter(key + " expects true or false, got '" + val + "'");
    case ParamType::integer: {
      std::int64_t v{};
      const auto [end, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
      if (val.empty() || ec != std::errc{} || end != val.data() + val.size())
        throw InvalidParameter(key + " expects an integer, got '" + val + "'");
      return {key, v};
    }
    case ParamType::real: {
      double v{};
      const auto [end, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
      if (val.empty() || ec != std::errc{} || end != val.data() + val.size())
        throw InvalidParameter(key + " expects a number, got '" + val + "'");
      return {key, v};
    }
    case ParamType::text:
    case ParamType::int_list:
    case ParamType::real_list:
      return {key, val};
  }
  return {key, val};
}

RunOutcome run_experiment(const ExperimentSpec& spec, const RunContext& ctx) {
  const auto& info = find_command(spec.command);
  ExperimentSpec resolved = spec;
  resolved.params = resolve_params(info, spec.params);

  const fs::path dir = spec.output_dir;
  fs::create_directories(dir);
  std::ostream& out = ctx.out ? *ctx.out : std::cout;
  Sink sink{dir, {}, out};
  const unsigned workers = ctx.workers ? ctx.workers : std::max(1u, default_workers());
  Env env{resolved.params, RngKey{spec.master_seed, experiment_id(spec.command)}, workers, ctx.paper_literal, sink};

  const auto t0 = std::chrono::steady_clock::now();
  const bool ok = handlers().at(info.name)(env);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto spec_text = serialize_spec(resolved);
  RunManifest m;
  m.spec_hash = sha256_hex(spec_text);
  m.master_seed = spec.master_seed;
  m.wall_seconds = wall;
  m.workers = workers;
  for (const auto& f : sink.files) m.files.push_back({f, sha256_file(dir / f)});
  sink.put("spec.toml", spec_text);
  sink.put("manifest.txt", m.str());
  return {ok ? kExitOk : kExitVerdictFailed, sink.files};
}

std::vector<std::string> replay_manifest(const fs::path& dir, const fs::path& into, const RunContext& ctx) {
  auto read = [](const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw InvalidParameter("cannot read " + f.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const auto expected = RunManifest::parse(read(dir / "manifest.txt"));
  auto spec = parse_spec(read(dir / "spec.toml"));
  if (sha256_hex(serialize_spec(spec)) != expected.spec_hash)
    throw InvalidParameter("spec.toml in " + dir.string() + " does not match the manifest's spec hash");
  spec.output_dir = into.string();
  run_experiment(spec, ctx);
  return checksum_mismatches(expected, RunManifest::parse(read(into / "manifest.txt")));
}

}  // namespace localsgd
