#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "localsgd/csv.hpp"
#include "localsgd/estimators.hpp"
#include "localsgd/objectives.hpp"
#include "localsgd/rng.hpp"

namespace localsgd {

struct PowerLawPoint {
  double s = 0.0;
  double y = 0.0;
  double weight = 1.0;
};

/// log y = intercept + exponent * log s.
struct PowerLawFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double exponent_stderr = 0.0;
  std::size_t points = 0;

  double predict(double s) const;
};

/// Weighted least squares on (log s, log y). Needs at least three points with
/// distinct s and y > 0; InvalidParameter otherwise, listing offending indices.
PowerLawFit fit_power_law(std::span<const PowerLawPoint> points);

/// Weight 1 / (relative stderr)^2 for a measured magnitude.
double relative_weight(double mean, double stderr_);

enum class SweepAxis { k, eta };
std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view name);

/// Which bias law a sweep targets. second: eta^2 k^(3/2); third: eta^3 k^2.
enum class BiasOrder { second, third };

/// Third order when the objective declares a finite Q > 0, second order when Q
/// is undeclared. Q = 0 has no bias to fit and is rejected.
BiasOrder bias_order_of(const Objective1D& obj);
double expected_exponent(BiasOrder order, SweepAxis axis);

struct SweepSpec {
  SweepAxis axis = SweepAxis::k;
  std::vector<double> grid;  ///< k values or step sizes
  double fixed = 0.0;        ///< eta for a k sweep, k for an eta sweep
  double x0 = 0.0;
  std::uint64_t n = 0;       ///< paths per grid point (antithetic)
};

struct SweepPoint {
  double s = 0.0;
  MonteCarloEstimate bias;
  bool significant = false;  ///< |mean| >= 5 stderr
  bool used_in_fit = false;
  std::string note;
};

struct SweepResult {
  BiasOrder order = BiasOrder::second;
  std::vector<SweepPoint> points;
  PowerLawFit fit;
  double expected = 0.0;
  /// Hypotheses that do not hold on the grid but do not block the fit.
  std::vector<std::string> warnings;
};

/// Regime gate for a sweep. Every grid point must satisfy eta H k <= 1/2 (the
/// leading-term regime of both bias laws). Throws OutOfRegime naming the
/// first violated hypothesis; returns the non-blocking warnings.
std::vector<std::string> check_sweep_regime(const Objective1D& obj, const SweepSpec& spec);

/// Antithetic bias at each grid point from independent streams, then a
/// magnitude fit over the significant points that share the majority sign.
/// Throws Inconclusive when fewer than three points survive.
SweepResult sweep_bias_scaling(const Objective1D& obj, const SweepSpec& spec, const RngKey& key,
                               unsigned workers = 0);

/// `axis,s,mean,stderr,used_in_fit`
CsvTable sweep_table(const SweepResult& result, SweepAxis axis);

/// key: value lines describing the fit.
std::string fit_summary(const SweepResult& result, SweepAxis axis);

}  // namespace localsgd
