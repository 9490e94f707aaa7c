#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace localsgd {

/// Law of SGD on F(x) = L x^2 / 2 with N(0, sigma^2) gradient noise after t
/// steps: Gaussian with these moments.
struct QuadDistribution {
  double mean = 0.0;
  double variance = 0.0;
};

/// Exact moments: mean (1 - eta L)^t x0 and variance
/// eta^2 sigma^2 (1 - (1 - eta L)^(2t)) / (1 - (1 - eta L)^2).
/// Throws OutOfRegime unless 0 < eta L < 1.
QuadDistribution quad_sgd_distribution(double L, double sigma, double eta, double x0, std::int64_t t);

/// Same mean, variance written as (1 - (1 - eta L)^t) eta^2 sigma^2 / (eta L).
/// Kept for comparison only; it is not the variance of the process.
QuadDistribution quad_sgd_distribution_literal(double L, double sigma, double eta, double x0,
                                               std::int64_t t);

/// Contraction factors and noise scales of k SGD steps on the two quadratic
/// comparators with curvatures L/2 (y) and L (z). sigma_y, sigma_z are per
/// unit noise scale.
struct KeyScales {
  double alpha_y = 0.0;
  double alpha_z = 0.0;
  double sigma_y = 0.0;
  double sigma_z = 0.0;
};

/// Requires 0 < eta L <= 1/6 and k >= 1.
KeyScales key_scales(double eta, double L, std::int64_t k);

/// eta^2 L sigma k^(3/2) / 24 when eta L k <= 1/2, else 0.12 eta sigma / sqrt(eta L).
/// Requires eta L <= 1/6 and k >= 2.
double sigma_gap_lower(double eta, double L, double sigma, std::int64_t k);

/// One side of a bias envelope. `valid` is false when the inputs fall outside
/// the hypotheses of the corresponding bound; `hypothesis` then names the
/// violated condition and `value` is still the formula's value.
struct EnvelopeMember {
  double value = 0.0;
  bool valid = true;
  std::string hypothesis;
};

struct BiasEnvelope {
  EnvelopeMember lower;
  EnvelopeMember upper;
};

/// Second-order envelope: upper min{4 eta^2 k^(3/2) H sigma, eta k^(1/2) sigma}
/// (eta <= 1/H), lower 0.002 min{eta^2 k^(3/2) H sigma, eta^(1/2) H^(-1/2) sigma}
/// (eta <= 1/(2H), k >= 2).
BiasEnvelope bias_envelope_2o(double eta, double H, double sigma, std::int64_t k);

/// Third-order envelope: upper min{eta^3 k^2 Q sigma^2 / 4, 4 eta^2 k^(3/2) H sigma,
/// eta k^(1/2) sigma} (eta <= 1/H), lower 0.005 eta^3 sigma^2 Q min{(k-1)/(eta H), k(k-1)}
/// (eta <= 1/(2H), Q <= H^2/(12 horizon sigma), k >= 2). The horizon defaults to k.
BiasEnvelope bias_envelope_3o(double eta, double H, double Q, double sigma, std::int64_t k,
                              std::optional<std::int64_t> horizon = std::nullopt);

/// One FedAvg round on the heterogeneous pair: x' = a x + b zeta.
struct HeteroRoundMap {
  double a = 0.0;
  double b = 0.0;

  double apply(double x, double zeta) const { return a * x + b * zeta; }
  /// R rounds from x0.
  double iterate(double x0, double zeta, std::int64_t R) const;
};

/// a = ((1 - eta H)^K + (1 - eta mu)^K) / 2,
/// b = ((1 - (1 - eta H)^K) / H - (1 - (1 - eta mu)^K) / mu) / 2, mu = H/2.
/// Throws OutOfRegime unless 0 < eta H < 1.
HeteroRoundMap hetero_round_map(double H, double eta, std::int64_t K);

/// b written as (1/H - (1 - eta H)^K - 1/mu + (1 - eta mu)^K) / 2, which does
/// not match the client recursions. Documentation only.
HeteroRoundMap hetero_round_map_literal(double H, double eta, std::int64_t K);

/// -0.0005 sqrt(eta/L) sigma min{R (eta L K)^(3/2), 1, (eta L K)^(1/2)}; 0 when R = 0.
/// Requires eta L <= 1/6.
double homog_drift_bound(double eta, double L, double sigma, std::int64_t K, std::int64_t R);

inline constexpr double kDefaultHeteroConstant = 0.01;

/// -(c_h / H) min{1, eta H K, (eta H K)^2 R} zeta. Requires eta H <= 1, c_h > 0.
double hetero_drift_bound(double eta, double H, double zeta_star, std::int64_t K, std::int64_t R,
                          double c_h = kDefaultHeteroConstant);

/// Admissible range [-sqrt(c1) sigma_y / alpha_y^k, 0] for the start mean,
/// c1 = 0.0005, sigma_y in absolute units.
struct StepWindow {
  double lo = 0.0;
  double hi = 0.0;
};
StepWindow expected_step_window(double eta, double L, double sigma, std::int64_t k);

/// (1 - eta L/2)^k e0 - (c2/2) sigma sqrt(eta/L) min(1, eta L k)^(3/2), c2 = 0.002.
/// Throws OutOfRegime when eta L > 1/6 or e0 lies outside the window.
double expected_step_bound(double eta, double L, double sigma, std::int64_t k, double e0);

}  // namespace localsgd
