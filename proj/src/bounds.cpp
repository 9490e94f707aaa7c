#include "localsgd/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "localsgd/errors.hpp"

namespace localsgd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double d(int v) { return static_cast<double>(v); }

void finish(BoundReport& r) {
  r.total = 0.0;
  for (const auto& t : r.terms) r.total += t.value;
}

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// sqrt(B M)/(sigma sqrt(H K R)), infinite without noise.
double noise_eta(const RateInputs& in) {
  if (in.sigma == 0.0) return kInf;
  return std::sqrt(in.B * d(in.M)) / (in.sigma * std::sqrt(in.H * d(in.K) * d(in.R)));
}

StepsizeRate assemble(std::string theorem, const RateInputs& in, double third_eta, double third_rate,
                      std::string third_eta_name, std::string third_rate_name) {
  StepsizeRate sr;
  sr.eta_candidates = {{"1/H", 1.0 / in.H}, {"noise", noise_eta(in)}, {std::move(third_eta_name), third_eta}};
  sr.eta = 1.0 / in.H;
  for (const auto& c : sr.eta_candidates) sr.eta = std::min(sr.eta, c.value);
  sr.rate.theorem = std::move(theorem);
  const double KR = d(in.K) * d(in.R);
  sr.rate.terms = {{"HB/(KR)", in.H * in.B / KR},
                   {"sigma sqrt(BH)/sqrt(MKR)", in.sigma * std::sqrt(in.B * in.H) / std::sqrt(d(in.M) * KR)},
                   {std::move(third_rate_name), third_rate}};
  finish(sr.rate);
  return sr;
}

}  // namespace

void RateInputs::validate() const {
  for (double v : {H, sigma, Q, G, D, B, zeta_star, zeta})
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidParameter("RateInputs: reals must be finite and non-negative");
  if (M < 1 || K < 1 || R < 1) throw InvalidParameter("RateInputs: M, K and R must be >= 1");
}

double BoundReport::term(std::string_view name) const {
  for (const auto& t : terms)
    if (t.name == name) return t.value;
  for (const auto& t : candidates)
    if (t.name == name) return t.value;
  throw InvalidParameter("no bound term named '" + std::string(name) + "'");
}

BoundReport lower_bound_homog(const RateInputs& in) {
  in.validate();
  if (in.K < 2) throw OutOfRegime("K >= 2 (K = " + std::to_string(in.K) + ")");
  const double K = d(in.K), R = d(in.R), M = d(in.M);
  BoundReport r;
  r.theorem = "lower_homog";
  const double a = in.sigma * in.D / std::sqrt(K * R);
  const double b = std::cbrt(in.H) * std::pow(in.sigma, 2.0 / 3.0) * std::pow(in.D, 4.0 / 3.0) /
                   (std::cbrt(K) * std::pow(R, 2.0 / 3.0));
  r.candidates = {{"sigma D/sqrt(KR)", a}, {"H^(1/3) sigma^(2/3) D^(4/3)/(K^(1/3) R^(2/3))", b}};
  r.terms = {{"HD^2/(KR)", in.H * in.D * in.D / (K * R)},
             {"sigma D/sqrt(MKR)", in.sigma * in.D / std::sqrt(M * K * R)},
             {"noise_bias", std::min(a, b)}};
  finish(r);
  return r;
}

BoundReport lower_bound_hetero(const RateInputs& in) {
  BoundReport r = lower_bound_homog(in);
  r.theorem = "lower_hetero";
  const double a = in.H > 0.0 ? in.zeta_star * in.zeta_star / in.H : kInf;
  const double b = std::cbrt(in.H) * std::pow(in.zeta_star, 2.0 / 3.0) * std::pow(in.D, 4.0 / 3.0) /
                   std::pow(d(in.R), 2.0 / 3.0);
  r.candidates.push_back({"zeta*^2/H", a});
  r.candidates.push_back({"H^(1/3) zeta*^(2/3) D^(4/3)/R^(2/3)", b});
  r.terms.push_back({"hetero_bias", in.zeta_star == 0.0 ? 0.0 : std::min(a, b)});
  finish(r);
  return r;
}

BoundReport upper_bound_uniform(const RateInputs& in) {
  in.validate();
  const double K = d(in.K), R = d(in.R), M = d(in.M);
  BoundReport r;
  r.theorem = "upper_uniform";
  r.terms = {{"HD^2/(KR)", in.H * in.D * in.D / (K * R)},
             {"sigma D/sqrt(MKR)", in.sigma * in.D / std::sqrt(M * K * R)},
             {"H^(1/3) sigma^(2/3) D^(4/3)/(K^(1/3) R^(2/3))",
              std::cbrt(in.H) * std::pow(in.sigma, 2.0 / 3.0) * std::pow(in.D, 4.0 / 3.0) /
                  (std::cbrt(K) * std::pow(R, 2.0 / 3.0))},
             {"H^(1/3) zeta^(2/3) D^(4/3)/R^(2/3)",
              std::cbrt(in.H) * std::pow(in.zeta, 2.0 / 3.0) * std::pow(in.D, 4.0 / 3.0) / std::pow(R, 2.0 / 3.0)}};
  finish(r);
  return r;
}

StepsizeRate stepsize_and_rate_convex_3o(const RateInputs& in) {
  in.validate();
  if (!(in.H > 0.0)) throw InvalidParameter("H must be positive");
  const double K = d(in.K), R = d(in.R);
  const double third_eta = (in.sigma == 0.0 || in.Q == 0.0)
                               ? kInf
                               : std::pow(in.B, 0.2) / (std::pow(K, 0.6) * std::pow(R, 0.2) * std::pow(in.Q, 0.4) *
                                                        std::pow(in.sigma, 0.8));
  const double third_rate =
      std::pow(in.B, 0.8) * std::pow(in.sigma, 0.8) * std::pow(in.Q, 0.4) / (std::pow(K, 0.4) * std::pow(R, 0.8));
  return assemble("convex3o", in, third_eta, third_rate, "third_order",
                  "B^(4/5) sigma^(4/5) Q^(2/5)/(K^(2/5) R^(4/5))");
}

StepsizeRate stepsize_and_rate_nonconvex_3o(const RateInputs& in) {
  in.validate();
  if (!(in.H > 0.0)) throw InvalidParameter("H must be positive");
  const double K = d(in.K), R = d(in.R), gs = in.G + in.sigma;
  const double third_eta = (gs == 0.0 || in.Q == 0.0)
                               ? kInf
                               : std::pow(in.B, 0.2) / (K * std::pow(R, 0.2) * std::pow(in.Q, 0.4) * std::pow(gs, 0.8));
  const double third_rate = std::pow(in.B, 0.8) * std::pow(gs, 0.8) * std::pow(in.Q, 0.4) / std::pow(R, 0.8);
  return assemble("nonconvex3o", in, third_eta, third_rate, "third_order", "B^(4/5) (G+sigma)^(4/5) Q^(2/5)/R^(4/5)");
}

StepsizeRate stepsize_and_rate_nonconvex_2o(const RateInputs& in) {
  in.validate();
  if (!(in.H > 0.0)) throw InvalidParameter("H must be positive");
  const double K = d(in.K), R = d(in.R), gs = in.G + in.sigma;
  const double third_eta =
      gs == 0.0 ? kInf
                : std::cbrt(in.B) / (K * std::cbrt(R) * std::pow(in.H, 2.0 / 3.0) * std::pow(gs, 2.0 / 3.0));
  const double third_rate =
      std::pow(in.B, 2.0 / 3.0) * std::pow(gs, 2.0 / 3.0) * std::pow(in.H, 2.0 / 3.0) / std::pow(R, 2.0 / 3.0);
  return assemble("nonconvex2o", in, third_eta, third_rate, "second_order",
                  "B^(2/3) (G+sigma)^(2/3) H^(2/3)/R^(2/3)");
}

std::string_view to_string(UpperTheorem t) {
  switch (t) {
    case UpperTheorem::convex3o: return "convex3o";
    case UpperTheorem::nonconvex3o: return "nonconvex3o";
    case UpperTheorem::nonconvex2o: return "nonconvex2o";
  }
  return "?";
}

UpperTheorem parse_upper_theorem(std::string_view name) {
  if (name == "convex3o") return UpperTheorem::convex3o;
  if (name == "nonconvex3o") return UpperTheorem::nonconvex3o;
  if (name == "nonconvex2o") return UpperTheorem::nonconvex2o;
  throw InvalidParameter("unknown theorem '" + std::string(name) + "' (convex3o, nonconvex3o, nonconvex2o)");
}

StepsizeRate stepsize_and_rate(UpperTheorem t, const RateInputs& in) {
  switch (t) {
    case UpperTheorem::convex3o: return stepsize_and_rate_convex_3o(in);
    case UpperTheorem::nonconvex3o: return stepsize_and_rate_nonconvex_3o(in);
    case UpperTheorem::nonconvex2o: return stepsize_and_rate_nonconvex_2o(in);
  }
  throw InvalidParameter("unknown theorem");
}

std::string UpperVerification::verdict_line() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << " theorem=" << to_string(theorem) << " measured=" << format_double(measured.mean)
     << " bound=" << format_double(bound) << " C=" << format_double(slack);
  return os.str();
}

UpperVerification verify_upper_bound(const std::vector<ClientObjective>& clients, const RateInputs& in, double x0,
                                     std::uint64_t n, const RngKey& key, UpperTheorem which, double slack,
                                     unsigned workers) {
  in.validate();
  if (clients.size() != static_cast<std::size_t>(in.M))
    throw InvalidParameter("verify_upper_bound: number of clients differs from M");
  if (!(slack > 0.0)) throw InvalidParameter("verify_upper_bound: slack must be positive");
  const bool third = which != UpperTheorem::nonconvex2o;
  for (const auto& c : clients) {
    const auto& k = c.objective.constants();
    if (k.H > in.H) throw OutOfRegime("declared H <= inputs.H (client H = " + num(k.H) + ")");
    const double sd = std::sqrt(c.noise.variance());
    if (sd > in.sigma * (1.0 + 1e-12)) throw OutOfRegime("noise sd <= inputs.sigma (client sd = " + num(sd) + ")");
    if (third) {
      if (!k.Q) throw OutOfRegime("Q declared (client '" + c.objective.name() + "' has unbounded third derivative)");
      if (*k.Q > in.Q) throw OutOfRegime("declared Q <= inputs.Q (client Q = " + num(*k.Q) + ")");
    }
  }

  UpperVerification v;
  v.theorem = which;
  v.slack = slack;
  const StepsizeRate sr = stepsize_and_rate(which, in);
  v.eta = sr.eta;
  v.bound = sr.rate.total;
  FedAvgConfig cfg{sr.eta, in.K, in.R, in.M};
  cfg.x0 = {x0};
  v.measured = fedavg_error(clients, cfg, n, key, FedAvgMetric::grad_sq, EstimatorMode::plain, workers);
  v.pass = v.measured.ci_hi <= slack * v.bound;
  return v;
}

CsvTable bound_table() { return CsvTable({"theorem", "term_name", "value"}); }

void add_bound_rows(CsvTable& table, const BoundReport& report) {
  for (const auto& t : report.terms) table.add_row({report.theorem, t.name, t.value});
  for (const auto& t : report.candidates) table.add_row({report.theorem, "candidate " + t.name, t.value});
  table.add_row({report.theorem, "total", report.total});
}

void add_bound_rows(CsvTable& table, const StepsizeRate& sr) {
  for (const auto& c : sr.eta_candidates) table.add_row({sr.rate.theorem, "eta " + c.name, c.value});
  table.add_row({sr.rate.theorem, "eta", sr.eta});
  add_bound_rows(table, sr.rate);
}

}  // namespace localsgd
