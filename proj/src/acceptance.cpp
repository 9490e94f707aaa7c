#include "localsgd/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

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

std::string_view to_string(Profile p) { return p == Profile::quick ? "quick" : "full"; }

Profile parse_profile(std::string_view name) {
  if (name == "quick") return Profile::quick;
  if (name == "full") return Profile::full;
  throw InvalidParameter("unknown profile '" + std::string(name) + "' (quick or full)");
}

std::string CriterionResult::verdict_line() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << detail;
  return os.str();
}

bool AcceptanceReport::all_pass() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const auto& c) { return c.pass; });
}

std::string AcceptanceReport::verdict_text() const {
  std::string out;
  for (const auto& c : criteria) out += c.verdict_line() + "\n";
  return out;
}

std::vector<std::string> AcceptanceReport::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  auto put = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw InvalidParameter("cannot write " + (dir / name).string());
    out << content;
    files.push_back(name);
  };
  for (const auto& c : criteria)
    for (const auto& csv : c.csvs) put(csv.file, csv.content);
  put("verdicts.txt", verdict_text());
  return files;
}

namespace {

struct Ctx {
  Profile profile;
  std::uint64_t seed;
  unsigned workers;

  std::uint64_t n(std::uint64_t full) const {
    if (profile == Profile::full) return full;
    const std::uint64_t q = full / 10;
    return std::max<std::uint64_t>(q + (q % 2), 2);
  }
  double tol(double t) const { return profile == Profile::full ? t : 1.5 * t; }
  RngKey key(int criterion, int sub = 0) const {
    return RngKey{seed, static_cast<std::uint64_t>(100 * criterion + sub)};
  }
};

CriterionResult start(int id, std::string name) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  return r;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

CriterionResult leftward_means(const Ctx& c) {
  auto r = start(1, "leftward_density_means");
  r.budget_seconds = 10.0;
  const auto f = make_piecewise_quadratic(2.0, 0.2, 0.1);
  const std::vector<std::int64_t> cps{128, 256, 512, 1024};
  const auto d = estimate_density(f, 0.0, 0.01, cps, c.n(65536), 200, -0.6, 0.6, c.key(1), c.workers);
  const double z = c.tol(2.0);
  bool ok = d.means.back().ci_hi < 0.0;
  std::ostringstream det;
  det << "mean(1024)=" << fmt(d.means.back().mean) << " gap z-scores";
  for (std::size_t i = 0; i < d.gaps.size(); ++i) {
    const auto& g = d.gaps[i];
    ok = ok && d.means[i + 1].mean < d.means[i].mean && g.mean < -z * g.std_error;
    det << " " << fmt(g.mean / g.std_error, 3);
  }
  det << " (need < -" << z << ")";
  r.pass = ok;
  r.detail = det.str();

  CsvTable hist({"checkpoint", "bin_lo", "bin_hi", "count"});
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const auto& h = d.histograms[i];
    const auto e = h.edges();
    for (std::size_t b = 0; b < h.bins(); ++b) hist.add_row({cps[i], e[b], e[b + 1], h.counts()[b]});
  }
  auto means = estimate_table();
  for (std::size_t i = 0; i < cps.size(); ++i)
    add_estimate_row(means, "density_mean", "piecewise_2_0.2", 0.01, cps[i], 1, 1, 1, EstimatorMode::plain,
                     d.means[i]);
  for (std::size_t i = 0; i < d.gaps.size(); ++i)
    add_estimate_row(means, "density_gap", "piecewise_2_0.2", 0.01, cps[i + 1], 1, 1, 1, EstimatorMode::plain,
                     d.gaps[i]);
  r.csvs = {{"criterion_01_density.csv", hist.str()}, {"criterion_01_means.csv", means.str()}};
  return r;
}

CriterionResult bias_sandwich(const Ctx& c) {
  auto r = start(2, "second_order_bias_sandwich");
  r.budget_seconds = 180.0;
  const auto f = make_piecewise_quadratic(1.0, 0.5, 1.0);
  const double eta = 0.01;
  const auto pts = estimate_bias(f, 0.0, eta, {16, 32, 64, 128}, c.n(10000000), EstimatorMode::antithetic, c.key(2),
                                 c.workers);
  const double z = c.tol(2.0);
  CsvTable t({"k", "mean", "stderr", "lower", "upper", "ok"});
  bool ok = true;
  std::ostringstream det;
  det << "|bias|/lower:";
  for (const auto& p : pts) {
    const auto env = bias_envelope_2o(eta, 1.0, 1.0, p.k);
    const double mag = -p.bias.mean;
    const double w = z * p.bias.std_error;
    const bool here = p.bias.ci_hi < 0.0 && env.lower.valid && env.upper.valid && mag + w >= env.lower.value &&
                      mag - w <= env.upper.value;
    ok = ok && here;
    t.add_row({p.k, p.bias.mean, p.bias.std_error, env.lower.value, env.upper.value, here});
    det << " k=" << p.k << ":" << fmt(mag / env.lower.value, 3);
  }
  r.pass = ok;
  r.detail = det.str() + " (all negative, inside envelope)";
  r.csvs = {{"criterion_02_bias.csv", t.str()}};
  return r;
}

CriterionResult exponent_fits(const Ctx& c) {
  auto r = start(3, "exponent_fits");
  r.budget_seconds = 600.0;
  struct Job {
    const char* label;
    Objective1D obj;
    SweepSpec spec;
    double lo, hi;
  };
  const auto pw = make_piecewise_quadratic(1.0, 0.5, 1.0);
  const auto lc = make_logcosh_instance(1.0, 0.5, 1.0);
  const std::uint64_t n = c.n(1000000);
  const std::vector<Job> jobs{
      {"piecewise_k", pw, {SweepAxis::k, {16, 32, 64, 128}, 0.002, 0.0, n}, 1.35, 1.65},
      {"piecewise_eta", pw, {SweepAxis::eta, {0.002, 0.004, 0.008}, 32, 0.0, n}, 1.85, 2.15},
      {"logcosh_k", lc, {SweepAxis::k, {16, 32, 64, 128}, 0.002, 0.0, n}, 1.8, 2.2},
      {"logcosh_eta", lc, {SweepAxis::eta, {0.002, 0.004, 0.008}, 32, 0.0, n}, 2.8, 3.2},
  };
  bool ok = true;
  std::ostringstream det;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& j = jobs[i];
    const double mid = 0.5 * (j.lo + j.hi), half = c.tol(0.5 * (j.hi - j.lo));
    std::string file = std::string("criterion_03_") + j.label + ".csv";
    try {
      const auto res = sweep_bias_scaling(j.obj, j.spec, c.key(3, static_cast<int>(i)), c.workers);
      const bool here = std::fabs(res.fit.exponent - mid) <= half;
      ok = ok && here;
      det << (i ? " " : "") << j.label << "=" << fmt(res.fit.exponent, 4) << (here ? "" : "(out)");
      r.csvs.push_back({file, sweep_table(res, j.spec.axis).str()});
    } catch (const std::exception& e) {
      ok = false;
      det << (i ? " " : "") << j.label << " error: " << e.what();
    }
  }
  r.pass = ok;
  r.detail = det.str();
  return r;
}

CriterionResult quadratic_oracle(const Ctx& c) {
  auto r = start(4, "quadratic_closed_form");
  const std::uint64_t n = c.n(100000);
  const double zmean = c.tol(4.0), rel = c.tol(0.03);
  CsvTable t({"L", "eta", "t", "mc_mean", "stderr", "oracle_mean", "mc_var", "oracle_var", "ok"});
  bool ok = true;
  int fails = 0, sub = 0;
  double worst_var = 0.0;
  for (double L : {0.5, 1.0, 2.0})
    for (double eta : {0.05, 0.1, 0.2}) {
      const auto m = estimate_iterate_moments(make_quadratic(L, 1.0), 1.0, eta, {1, 5, 20}, n, c.key(4, sub++),
                                              c.workers);
      for (const auto& p : m) {
        const auto d = quad_sgd_distribution(L, 1.0, eta, 1.0, p.k);
        const double vr = std::fabs(p.variance / d.variance - 1.0);
        const bool here = p.mean.within(d.mean, zmean) && vr <= rel;
        worst_var = std::max(worst_var, vr);
        if (!here) ++fails;
        ok = ok && here;
        t.add_row({L, eta, p.k, p.mean.mean, p.mean.std_error, d.mean, p.variance, d.variance, here});
      }
    }
  r.pass = ok;
  r.detail = "27 grid points, " + std::to_string(fails) + " outside; worst variance error " +
             fmt(100 * worst_var, 3) + "% (limit " + fmt(100 * rel, 3) + "%)";
  r.csvs = {{"criterion_04_quadratic.csv", t.str()}};
  return r;
}

CriterionResult hetero_recursion(const Ctx&) {
  auto r = start(5, "heterogeneous_recursion");
  r.budget_seconds = 1.0;
  CsvTable t({"eta", "K", "R", "fedavg", "closed_form", "abs_diff"});
  double worst = 0.0;
  for (double eta : {0.01, 0.05, 0.1, 0.2, 0.5})
    for (int K : {1, 2, 3, 5, 8, 16})
      for (int R : {1, 2, 5, 10}) {
        FedAvgConfig cfg{eta, K, R, 2};
        const auto out = run_fedavg(make_hetero_pair(1.0, 1.0), cfg, RngKey{});
        const auto m = hetero_round_map(1.0, eta, K);
        double x = 0.0;
        for (int j = 1; j <= R; ++j) {
          x = m.apply(x, 1.0);
          worst = std::max(worst, std::fabs(*out.round_starts.at(j) - x));
        }
        t.add_row({eta, K, R, out.round_starts.final_value(), x, std::fabs(out.round_starts.final_value() - x)});
      }
  bool b1 = true;
  for (double eta : {0.01, 0.05, 0.1, 0.2, 0.5, 0.9}) b1 = b1 && hetero_round_map(1.0, eta, 1).b == 0.0;
  const double b2 = hetero_round_map(1.0, 0.1, 2).b;
  double worst_rel = 0.0;
  for (double eta : {0.001, 0.005, 0.01, 0.02, 0.05})
    for (int K = 2; eta * K <= 0.1 + 1e-12; ++K) {
      const double approx = -eta * eta * K * (K - 1) / 8.0;
      worst_rel = std::max(worst_rel, std::fabs(hetero_round_map(1.0, eta, K).b / approx - 1.0));
    }
  r.pass = worst <= 1e-12 && b1 && std::fabs(b2 + 0.0025) <= 1e-12 && worst_rel <= 0.10;
  r.detail = "max |fedavg - closed form| = " + fmt(worst, 3) + ", b(K=1)=0 " + (b1 ? "exact" : "NOT exact") +
             ", b(0.1,2)=" + fmt(b2, 17) + ", worst small-step relative error " + fmt(100 * worst_rel, 3) + "%";
  r.csvs = {{"criterion_05_hetero_recursion.csv", t.str()}};
  return r;
}

CriterionResult hetero_drift(const Ctx&) {
  auto r = start(6, "heterogeneous_drift_bound");
  CsvTable t({"eta", "K", "R", "x_final", "bound_c0.01", "bound_c0.07", "ok"});
  bool ok = true;
  int violations07 = 0, points = 0;
  double cmax = std::numeric_limits<double>::infinity();
  for (double eta : {0.01, 0.02, 0.05, 0.1, 0.2, 0.5})
    for (int K : {2, 4, 8, 16, 32})
      for (int R : {1, 2, 5, 10, 50}) {
        FedAvgConfig cfg{eta, K, R, 2};
        const double x = run_fedavg(make_hetero_pair(1.0, 1.0), cfg, RngKey{}).round_starts.final_value();
        const double b1 = hetero_drift_bound(eta, 1.0, 1.0, K, R, kDefaultHeteroConstant);
        const double b7 = hetero_drift_bound(eta, 1.0, 1.0, K, R, 0.07);
        const double s = eta * K;
        cmax = std::min(cmax, -x / std::min({1.0, s, s * s * R}));
        const bool here = x <= b1;
        ok = ok && here;
        violations07 += x > b7;
        ++points;
        t.add_row({eta, K, R, x, b1, b7, here});
      }
  r.pass = ok;
  r.detail = std::to_string(points) + " points hold at c_h=0.01; largest valid c_h on grid " + fmt(cmax, 4) +
             "; c_h=0.07 violated at " + std::to_string(violations07) + " points (documented, not asserted)";
  r.csvs = {{"criterion_06_hetero_drift.csv", t.str()}};
  return r;
}

CriterionResult homog_drift(const Ctx& c) {
  auto r = start(7, "homogeneous_round_drift");
  r.budget_seconds = 120.0;
  const auto pw = make_piecewise_quadratic(1.0, 0.5, 1.0);
  const double z = c.tol(2.0);
  auto t = estimate_table();
  bool ok = true;
  std::ostringstream det;
  int sub = 0;
  struct Cfg {
    double eta;
    int K, R;
  };
  for (const Cfg g : {Cfg{0.1, 10, 5}, Cfg{0.05, 20, 10}}) {
    FedAvgConfig cfg{g.eta, g.K, g.R, 2};
    const auto e = fedavg_error(homogeneous_clients(pw, 2), cfg, c.n(4000000), c.key(7, sub++),
                                FedAvgMetric::final_iterate, EstimatorMode::antithetic, c.workers);
    const double bound = homog_drift_bound(g.eta, 1.0, 1.0, g.K, g.R);
    ok = ok && e.mean + z * e.std_error <= bound;
    det << (sub > 1 ? "; " : "") << "(eta=" << g.eta << ",K=" << g.K << ",R=" << g.R << ") E[x]=" << fmt(e.mean)
        << " bound=" << fmt(bound);
    add_estimate_row(t, "homog_drift", "piecewise_1_0.5", g.eta, g.K * g.R, g.K, g.R, 2, EstimatorMode::antithetic, e);
  }
  r.pass = ok;
  r.detail = det.str();
  r.csvs = {{"criterion_07_homog_drift.csv", t.str()}};
  return r;
}

CriterionResult dominance(const Ctx& c) {
  auto r = start(8, "stochastic_dominance");
  const auto pw = make_piecewise_quadratic(1.0, 0.5, 1.0);
  CsvTable t({"comparator", "violation", "at", "dkw_bound"});
  bool ok = true;
  std::ostringstream det;
  int sub = 0;
  for (double curv : {1.0, 0.5}) {
    const auto d = dominance_check(pw, make_quadratic(curv, 1.0), 0.0, 0.05, 20, c.n(1000000), c.key(8, sub++),
                                   c.workers);
    ok = ok && d.violation <= c.tol(3.0) * d.dkw_bound;
    det << (sub > 1 ? "; " : "") << "quadratic(" << curv << ") violation=" << fmt(d.violation)
        << " DKW=" << fmt(d.dkw_bound);
    t.add_row({"quadratic_" + fmt(curv), d.violation, d.at, d.dkw_bound});
  }
  r.pass = ok;
  r.detail = det.str();
  r.csvs = {{"criterion_08_dominance.csv", t.str()}};
  return r;
}

CriterionResult sde_coefficient(const Ctx& c) {
  auto r = start(9, "sde_curvature_coefficient");
  const auto lc = make_logcosh_instance(1.0, 0.5, 1.0);
  BackwardOptions opts;
  opts.workers = c.workers;
  const auto b = check_backward_expansion(lc, 0.0, 0.1, default_t_grid(), c.n(10000000), c.key(9, 0), opts);
  const double target = b.predicted.u_tt;
  const bool main_ok = std::fabs(b.u_tt.mean - target) <= c.tol(0.10) * std::fabs(target);
  const double ito = taylor_coeffs_predicted(lc, 0.0, 0.1, 1.0, DiffusionConvention::ito).u_tt;

  BackwardOptions plain = opts;
  plain.antithetic = false;
  const auto q = check_backward_expansion(make_quadratic(1.0, 1.0), 0.0, 0.1, default_t_grid(), c.n(1000000),
                                          c.key(9, 1), plain);
  const bool control_ok = q.u_tt.within(0.0, c.tol(4.0));

  r.pass = main_ok && control_ok;
  r.detail = "fitted u_tt=" + fmt(b.u_tt.mean, 5) + " +- " + fmt(b.u_tt.std_error, 2) + " vs predicted " +
             fmt(target, 5) + " (limit " + fmt(100 * c.tol(0.10), 3) + "%, off by " +
             fmt(100 * std::fabs(b.u_tt.mean / target - 1.0), 3) + "%); Ito generator predicts " + fmt(ito, 5) +
             " (off by " + fmt(100 * std::fabs(b.u_tt.mean / ito - 1.0), 3) + "%); quadratic control u_tt=" +
             fmt(q.u_tt.mean, 3) + " (" + fmt(q.u_tt.mean / q.u_tt.std_error, 3) + " stderr)";
  auto tab = backward_table(b).str();
  r.csvs = {{"criterion_09_logcosh.csv", tab}, {"criterion_09_quadratic_control.csv", backward_table(q).str()}};
  return r;
}

CriterionResult upper_bounds(const Ctx& c) {
  auto r = start(10, "upper_bound_verification");
  const auto lc = make_logcosh_instance(1.0, 0.5, 1.0);
  RateInputs in;
  in.H = 1.0, in.Q = 0.5, in.sigma = 1.0;
  in.B = lc.value(1.0) - lc.value(0.0);
  in.G = std::fabs(lc.mean_grad(1.0));
  in.D = 1.0;
  in.M = 8, in.K = 16, in.R = 64;
  const auto clients = homogeneous_clients(lc, in.M);
  CsvTable t({"theorem", "eta", "measured", "stderr", "bound", "C", "pass"});
  bool ok = true;
  std::ostringstream det;
  int sub = 0;
  for (auto th : {UpperTheorem::convex3o, UpperTheorem::nonconvex3o}) {
    const auto key = c.key(10, sub++);
    const auto v = verify_upper_bound(clients, in, 1.0, c.n(2000), key, th, kDefaultSlack, c.workers);
    const auto neg = verify_upper_bound(clients, in, 1.0, c.n(2000), key, th, 0.001, c.workers);
    ok = ok && v.pass && !neg.pass;
    det << (sub > 1 ? "; " : "") << v.verdict_line() << " (negative control " << (neg.pass ? "PASSED" : "fails")
        << ")";
    for (const auto* x : {&v, &neg})
      t.add_row({to_string(th), x->eta, x->measured.mean, x->measured.std_error, x->bound, x->slack, x->pass});
  }
  r.pass = ok;
  r.detail = det.str();
  r.csvs = {{"criterion_10_upper_bounds.csv", t.str()}};
  return r;
}

CriterionResult arithmetic(const Ctx&) {
  auto r = start(11, "pure_arithmetic_identities");
  CsvTable t({"eta_L", "k", "sigma_gap", "lower", "ok"});
  int points = 0, gap_fail = 0, small_fail = 0;
  double worst_ratio = 0.0;
  const double qlo = 1e-3, qhi = 1.0 / 6.0;
  for (int i = 0; i < 40; ++i) {
    const double q = i == 39 ? qhi : qlo * std::pow(qhi / qlo, i / 39.0);
    for (int k = 2; k <= 256; ++k) {
      const auto s = key_scales(q, 1.0, k);
      const double gap = s.sigma_y - s.sigma_z;
      const double lo = sigma_gap_lower(q, 1.0, 1.0, k);
      const bool here = gap >= lo;
      ++points;
      if (!here) {
        ++gap_fail;
        if (q * k <= 0.5) ++small_fail;
        worst_ratio = std::max(worst_ratio, lo / gap);
      }
      t.add_row({q, k, gap, lo, here});
    }
  }

  std::mt19937_64 gen(12345);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  int identity_fail = 0, eta_fail = 0;
  for (int i = 0; i < 2000; ++i) {
    RateInputs in;
    in.H = u(gen), in.sigma = u(gen), in.Q = u(gen), in.G = u(gen), in.D = u(gen), in.B = u(gen);
    in.M = 1 + static_cast<int>(gen() % 32);
    in.K = 2 + static_cast<int>(gen() % 128);
    in.R = 1 + static_cast<int>(gen() % 1024);
    const auto homog = lower_bound_homog(in);
    const auto hetero = lower_bound_hetero(in);
    bool same = hetero.total == homog.total;
    for (std::size_t j = 0; j < homog.terms.size(); ++j) same = same && hetero.terms[j].value == homog.terms[j].value;
    identity_fail += !same;
    for (auto th : {UpperTheorem::convex3o, UpperTheorem::nonconvex3o, UpperTheorem::nonconvex2o})
      eta_fail += !(stepsize_and_rate(th, in).eta <= 1.0 / in.H);
  }
  r.pass = gap_fail == 0 && identity_fail == 0 && eta_fail == 0;
  r.detail = "sigma gap: " + std::to_string(gap_fail) + "/" + std::to_string(points) + " grid points below the lower bound (" +
             std::to_string(small_fail) + " in the eta L k <= 1/2 branch; worst bound/gap " + fmt(worst_ratio, 4) +
             "); hetero(zeta*=0)==homog mismatches " + std::to_string(identity_fail) + "/2000; eta > 1/H " +
             std::to_string(eta_fail) + "/6000";
  r.csvs = {{"criterion_11_sigma_gap.csv", t.str()}};
  return r;
}

using CriterionFn = std::function<CriterionResult(const Ctx&)>;

const std::vector<CriterionFn>& criteria() {
  static const std::vector<CriterionFn> all{leftward_means,   bias_sandwich,    exponent_fits, quadratic_oracle,
                                            hetero_recursion, hetero_drift, homog_drift,   dominance,
                                            sde_coefficient,  upper_bounds, arithmetic};
  return all;
}

std::vector<CriterionResult> run_all(const Ctx& ctx, std::ostream* progress) {
  std::vector<CriterionResult> out;
  for (const auto& fn : criteria()) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = fn(ctx);
    } catch (const std::exception& e) {
      r.id = static_cast<int>(out.size()) + 1;
      r.name = "criterion_" + std::to_string(r.id);
      r.pass = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.budget_seconds > 0.0 && r.seconds > r.budget_seconds) {
      r.pass = false;
      r.detail += "; runtime over budget";
    }
    if (progress) {
      *progress << r.verdict_line() << " (" << fmt(r.seconds, 3) << " s";
      if (r.budget_seconds > 0.0) *progress << ", budget " << r.budget_seconds << " s";
      *progress << ")" << std::endl;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

AcceptanceReport acceptance_suite(const AcceptanceOptions& opts, std::ostream* progress) {
  AcceptanceReport report;
  report.profile = opts.profile;
  const unsigned first = opts.workers ? opts.workers : std::max(1u, default_workers());
  const Ctx ctx{opts.profile, opts.master_seed, first};
  report.criteria = run_all(ctx, progress);
  if (!opts.check_determinism) return report;

  const auto t0 = std::chrono::steady_clock::now();
  const unsigned second = first == 1 ? 3 : 1;
  if (progress) *progress << "rerunning criteria 1-11 with " << second << " worker(s) for criterion 12" << std::endl;
  const auto rerun = run_all(Ctx{opts.profile, opts.master_seed, second}, nullptr);

  auto r = start(12, "determinism");
  CsvTable t({"file", "sha256_workers_a", "sha256_workers_b", "match"});
  int files = 0, mismatched = 0;
  bool verdicts_match = true;
  for (std::size_t i = 0; i < report.criteria.size(); ++i) {
    const auto& a = report.criteria[i];
    const auto& b = rerun[i];
    verdicts_match = verdicts_match && a.pass == b.pass;
    if (a.csvs.size() != b.csvs.size()) {
      ++mismatched;
      continue;
    }
    for (std::size_t j = 0; j < a.csvs.size(); ++j) {
      const auto ha = sha256_hex(a.csvs[j].content), hb = sha256_hex(b.csvs[j].content);
      ++files;
      mismatched += ha != hb;
      t.add_row({a.csvs[j].file, ha, hb, ha == hb});
    }
  }
  r.pass = mismatched == 0 && verdicts_match && files > 0;
  r.detail = std::to_string(files - mismatched) + "/" + std::to_string(files) +
             " CSV checksums identical between " + std::to_string(first) + " and " + std::to_string(second) +
             " worker(s)" + (verdicts_match ? "" : "; verdicts differ");
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.csvs = {{"criterion_12_checksums.csv", t.str()}};
  if (progress) *progress << r.verdict_line() << " (" << fmt(r.seconds, 3) << " s)" << std::endl;
  report.criteria.push_back(std::move(r));
  return report;
}

}  // namespace localsgd
