#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "localsgd/csv.hpp"
#include "localsgd/engine.hpp"
#include "localsgd/estimators.hpp"
#include "localsgd/objectives.hpp"
#include "localsgd/rng.hpp"

namespace localsgd {

/// Time Taylor coefficients of u(t, x) = E[X(t) | X(0) = x] at t = 0.
struct TaylorCoeffs {
  double u_t = 0.0;
  double u_tt = 0.0;
};

/// How the diffusion term of the backward equation is written for
/// dX = -F'(X) dt + sqrt(eta) sigma dW.
///   unhalved: u_t = -F' u_x + eta sigma^2 u_xx      -> u_tt = F'F'' - eta sigma^2 F'''
///   ito:      u_t = -F' u_x + eta sigma^2 u_xx / 2  -> u_tt = F'F'' - eta sigma^2 F''' / 2
/// The Ito generator is the one the process actually has.
enum class DiffusionConvention { unhalved, ito };

std::string_view to_string(DiffusionConvention c);
DiffusionConvention parse_diffusion_convention(std::string_view name);

TaylorCoeffs taylor_coeffs_predicted(const Objective1D& obj, double x, double eta, double sigma,
                                     DiffusionConvention convention = DiffusionConvention::unhalved);

/// E[x^(k)] - z^(k) implied by the coefficients for SGD with step eta:
/// (u_tt - F'F'') (eta k)^2 / 2. Unhalved gives -eta^3 k^2 sigma^2 F''' / 2.
double predicted_discrete_bias(const Objective1D& obj, double x, double eta, double sigma, std::int64_t k,
                               DiffusionConvention convention = DiffusionConvention::unhalved);

/// X <- X - F'(X) dt - sqrt(eta dt) xi with xi from the objective's Gaussian
/// noise at the same keys run_sgd uses. With dt = eta the update is
/// arithmetically identical to run_sgd. Noise must be Gaussian or zero.
Trajectory euler_maruyama(const Objective1D& obj, double x0, double eta, double dt, std::int64_t steps,
                          const RngKey& key, double antithetic_sign = 1.0,
                          CheckpointPolicy policy = CheckpointPolicy::sparse);

struct BackwardOptions {
  double dt = 0.01;
  /// Adds a t^3 column to the fit.
  bool cubic_nuisance = true;
  bool antithetic = true;
  DiffusionConvention convention = DiffusionConvention::unhalved;
  /// When positive, a fitted u_tt whose 95% half-width exceeds
  /// relative_tolerance * |predicted u_tt| is reported as Inconclusive.
  double relative_tolerance = 0.0;
  unsigned workers = 0;
};

struct BackwardPoint {
  double t = 0.0;
  MonteCarloEstimate u;  ///< E[X(t)]
};

struct BackwardCheck {
  std::vector<BackwardPoint> points;
  MonteCarloEstimate u_t;   ///< fitted
  MonteCarloEstimate u_tt;  ///< fitted
  TaylorCoeffs predicted;
  DiffusionConvention convention = DiffusionConvention::unhalved;
};

/// Default time grid {0.05, 0.1, 0.15, 0.2}.
std::vector<double> default_t_grid();

/// Simulates the SDE from x with step opts.dt, estimates u at each t and fits
/// u(t) - x = u_t t + u_tt t^2 / 2 (+ c t^3) by weighted least squares with
/// weights 1/t. The fit is applied to every path (pair) so the coefficient
/// standard errors include the correlation between time points.
/// Requires max(t) (H + |F'(x)|) <= 0.2 and every t a multiple of dt.
BackwardCheck check_backward_expansion(const Objective1D& obj, double x, double eta,
                                       const std::vector<double>& t_grid, std::uint64_t n, const RngKey& key,
                                       const BackwardOptions& opts = {});

/// `t,u_mean,u_stderr`
CsvTable backward_table(const BackwardCheck& check);
std::string backward_summary(const BackwardCheck& check);

}  // namespace localsgd
