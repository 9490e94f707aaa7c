#include "localsgd/scaling.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "localsgd/errors.hpp"

namespace localsgd {

double PowerLawFit::predict(double s) const { return std::exp(intercept + exponent * std::log(s)); }

PowerLawFit fit_power_law(std::span<const PowerLawPoint> points) {
  const std::size_t n = points.size();
  if (n < 3) throw InvalidParameter("fit_power_law: need at least 3 points, got " + std::to_string(n));
  std::string bad;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = points[i];
    if (!(p.s > 0.0 && p.y > 0.0 && p.weight > 0.0) || !std::isfinite(p.y) || !std::isfinite(p.weight))
      bad += (bad.empty() ? "" : ",") + std::to_string(i);
  }
  if (!bad.empty()) throw InvalidParameter("fit_power_law: need s > 0, y > 0, weight > 0 (indices " + bad + ")");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (points[i].s == points[j].s)
        throw InvalidParameter("fit_power_law: duplicate s at indices " + std::to_string(i) + "," + std::to_string(j));

  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::log(points[i].s);
    y(i) = std::log(points[i].y);
    w(i) = points[i].weight;
  }
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd Xw = sw.asDiagonal() * X;
  const Eigen::VectorXd yw = sw.asDiagonal() * y;
  const Eigen::VectorXd beta = Xw.colPivHouseholderQr().solve(yw);

  PowerLawFit fit;
  fit.points = n;
  fit.intercept = beta(0);
  fit.exponent = beta(1);
  const Eigen::VectorXd resid = yw - Xw * beta;
  const double ssr = resid.squaredNorm();
  const double ybar = w.dot(y) / w.sum();
  double sst = 0.0;
  for (std::size_t i = 0; i < n; ++i) sst += w(i) * (y(i) - ybar) * (y(i) - ybar);
  fit.r_squared = sst > 0.0 ? std::clamp(1.0 - ssr / sst, 0.0, 1.0) : 1.0;
  const Eigen::Matrix2d cov = (Xw.transpose() * Xw).inverse() * (ssr / static_cast<double>(n - 2));
  fit.exponent_stderr = std::sqrt(std::max(cov(1, 1), 0.0));
  return fit;
}

double relative_weight(double mean, double stderr_) {
  if (!(stderr_ > 0.0)) return 1.0;
  const double r = stderr_ / std::fabs(mean);
  return 1.0 / (r * r);
}

std::string_view to_string(SweepAxis axis) { return axis == SweepAxis::k ? "k" : "eta"; }

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "k") return SweepAxis::k;
  if (name == "eta") return SweepAxis::eta;
  throw InvalidParameter("unknown sweep axis '" + std::string(name) + "' (expected k or eta)");
}

BiasOrder bias_order_of(const Objective1D& obj) {
  const auto& Q = obj.constants().Q;
  if (!Q) return BiasOrder::second;
  if (!(*Q > 0.0)) throw OutOfRegime("Q > 0 (objective '" + obj.name() + "' has no bias to fit)");
  return BiasOrder::third;
}

double expected_exponent(BiasOrder order, SweepAxis axis) {
  if (order == BiasOrder::second) return axis == SweepAxis::k ? 1.5 : 2.0;
  return axis == SweepAxis::k ? 2.0 : 3.0;
}

namespace {

struct GridPoint {
  double eta;
  std::int64_t k;
};

std::vector<GridPoint> expand(const SweepSpec& spec) {
  std::vector<GridPoint> out;
  for (double s : spec.grid) {
    if (spec.axis == SweepAxis::k) {
      if (!(s >= 1.0) || s != std::floor(s)) throw InvalidParameter("k grid values must be positive integers");
      out.push_back({spec.fixed, static_cast<std::int64_t>(s)});
    } else {
      if (!(spec.fixed >= 1.0) || spec.fixed != std::floor(spec.fixed))
        throw InvalidParameter("fixed k must be a positive integer");
      out.push_back({s, static_cast<std::int64_t>(spec.fixed)});
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::vector<std::string> check_sweep_regime(const Objective1D& obj, const SweepSpec& spec) {
  if (spec.grid.size() < 3) throw InvalidParameter("sweep grid needs at least 3 points");
  const BiasOrder order = bias_order_of(obj);
  const auto& c = obj.constants();
  const double H = c.H;
  std::vector<std::string> warnings;
  std::int64_t kmax = 0;
  for (const auto& p : expand(spec)) {
    if (!(p.eta > 0.0)) throw InvalidParameter("step sizes must be positive");
    if (p.k < 2) throw OutOfRegime("k >= 2 (k = " + std::to_string(p.k) + ")");
    if (p.eta * H * static_cast<double>(p.k) > 0.5)
      throw OutOfRegime("eta <= 1/(2 H k) (eta = " + fmt(p.eta) + ", k = " + std::to_string(p.k) +
                        ", eta H k = " + fmt(p.eta * H * static_cast<double>(p.k)) + ")");
    kmax = std::max(kmax, p.k);
  }
  if (order == BiasOrder::third && c.sigma > 0.0) {
    const double limit = H * H / (12.0 * static_cast<double>(kmax) * c.sigma);
    if (*c.Q > limit)
      warnings.push_back("Q <= H^2/(12 K sigma) fails (Q = " + fmt(*c.Q) + ", limit " + fmt(limit) +
                         "); the lower envelope is not guaranteed");
  }
  return warnings;
}

SweepResult sweep_bias_scaling(const Objective1D& obj, const SweepSpec& spec, const RngKey& key,
                               unsigned workers) {
  SweepResult res;
  res.warnings = check_sweep_regime(obj, spec);
  res.order = bias_order_of(obj);
  res.expected = expected_exponent(res.order, spec.axis);

  const auto grid = expand(spec);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& g = grid[i];
    const auto est = estimate_bias(obj, spec.x0, g.eta, {g.k}, spec.n, EstimatorMode::antithetic,
                                   key.with_round(static_cast<std::uint32_t>(i)), workers);
    SweepPoint p;
    p.s = spec.grid[i];
    p.bias = est.front().bias;
    p.significant = std::fabs(p.bias.mean) >= 5.0 * p.bias.std_error && p.bias.mean != 0.0;
    if (!p.significant) p.note = "|mean| < 5 stderr";
    res.points.push_back(p);
  }

  int positive = 0, negative = 0;
  for (const auto& p : res.points)
    if (p.significant) (p.bias.mean > 0.0 ? positive : negative)++;
  const double majority = positive > negative ? 1.0 : -1.0;

  std::vector<PowerLawPoint> fit_points;
  for (auto& p : res.points) {
    if (!p.significant) continue;
    if (p.bias.mean * majority < 0.0) {
      p.note = "sign opposite to majority";
      continue;
    }
    p.used_in_fit = true;
    fit_points.push_back({p.s, std::fabs(p.bias.mean), relative_weight(p.bias.mean, p.bias.std_error)});
  }
  if (fit_points.size() < 3) {
    double worst = 0.0;
    for (const auto& p : res.points)
      if (p.bias.mean != 0.0) worst = std::max(worst, 5.0 * p.bias.std_error / std::fabs(p.bias.mean));
    const double factor = std::max(4.0, worst * worst * 2.0);
    throw Inconclusive(static_cast<std::uint64_t>(static_cast<double>(spec.n) * factor),
                       "only " + std::to_string(fit_points.size()) + " grid points are significant");
  }
  res.fit = fit_power_law(fit_points);
  return res;
}

CsvTable sweep_table(const SweepResult& result, SweepAxis axis) {
  CsvTable t({"axis", "s", "mean", "stderr", "used_in_fit"});
  for (const auto& p : result.points) t.add_row({to_string(axis), p.s, p.bias.mean, p.bias.std_error, p.used_in_fit});
  return t;
}

std::string fit_summary(const SweepResult& result, SweepAxis axis) {
  std::ostringstream os;
  os << "axis: " << to_string(axis) << "\n"
     << "order: " << (result.order == BiasOrder::second ? "second" : "third") << "\n"
     << "exponent: " << format_double(result.fit.exponent) << "\n"
     << "exponent_stderr: " << format_double(result.fit.exponent_stderr) << "\n"
     << "intercept: " << format_double(result.fit.intercept) << "\n"
     << "r_squared: " << format_double(result.fit.r_squared) << "\n"
     << "expected_exponent: " << format_double(result.expected) << "\n"
     << "points_used: " << result.fit.points << "\n";
  for (const auto& w : result.warnings) os << "warning: " << w << "\n";
  for (const auto& p : result.points)
    if (!p.note.empty()) os << "excluded: s=" << format_double(p.s) << " (" << p.note << ")\n";
  return os.str();
}

}  // namespace localsgd
