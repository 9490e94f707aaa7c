#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace localsgd {

enum class NoiseKind { gaussian, uniform, point_mass };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);

/// Additive gradient noise. Gaussian has standard deviation `scale`, uniform is
/// supported on [-scale, scale], point mass always returns `scale`.
struct NoiseModel {
  NoiseKind kind = NoiseKind::point_mass;
  double scale = 0.0;

  static NoiseModel gaussian(double sigma) { return {NoiseKind::gaussian, sigma}; }
  static NoiseModel uniform(double sigma) { return {NoiseKind::uniform, sigma}; }
  static NoiseModel point_mass(double value = 0.0) { return {NoiseKind::point_mass, value}; }

  double variance() const;

  /// Maps a uniform draw u in (0, 1) to a noise value. `sign` = -1 yields the
  /// antithetic partner of the same draw.
  double from_uniform(double u, double sign = 1.0) const;
};

// Objective shapes. Each provides F, F', F'', F''' in closed form.

/// F(x) = h_right x^2 / 2 for x >= 0, h_left x^2 / 2 for x < 0.
struct PiecewiseQuadratic {
  double h_right;
  double h_left;

  double value(double x) const { return 0.5 * (x >= 0.0 ? h_right : h_left) * x * x; }
  double grad(double x) const { return (x >= 0.0 ? h_right : h_left) * x; }
  double hess(double x) const { return x >= 0.0 ? h_right : h_left; }
  double third(double) const { return 0.0; }
};

/// F(x) = curvature x^2 / 2 - linear x.
struct Quadratic {
  double curvature;
  double linear = 0.0;

  double value(double x) const { return 0.5 * curvature * x * x - linear * x; }
  double grad(double x) const { return curvature * x - linear; }
  double hess(double) const { return curvature; }
  double third(double) const { return 0.0; }
};

/// log(cosh(x)) without overflow.
inline double log_cosh(double x) {
  const double a = std::fabs(x);
  if (a > 20.0) return a - 0.69314718055994530942 + std::log1p(std::exp(-2.0 * a));
  // cosh(a) - 1 = 2 sinh(a/2)^2 keeps full relative precision near 0.
  const double h = std::sinh(0.5 * a);
  return std::log1p(2.0 * h * h);
}

/// phi(y) = integral_0^y log cosh(s) ds, by composite Gauss-Legendre quadrature.
double integrated_log_cosh(double y);

/// F(x) = 3/8 H x^2 + H^3/(64 Q^2) phi(4 Q x / H), mirrored to F(-x) when
/// `orientation` is -1. F'' ranges over [H/2, H] and F''' over [0, Q].
struct LogCoshShape {
  double H;
  double Q;
  double orientation = 1.0;

  double scale() const { return 4.0 * Q / H; }
  double value(double x) const {
    const double y = orientation * x;
    return 0.375 * H * y * y + H * H * H / (64.0 * Q * Q) * integrated_log_cosh(scale() * y);
  }
  double grad(double x) const {
    const double y = orientation * x;
    return orientation * (0.75 * H * y + H * H / (16.0 * Q) * log_cosh(scale() * y));
  }
  double hess(double x) const {
    const double y = orientation * x;
    return 0.75 * H + 0.25 * H * std::tanh(scale() * y);
  }
  double third(double x) const {
    const double c = std::cosh(scale() * orientation * x);
    return orientation * Q / (c * c);
  }
};

using ObjectiveShape = std::variant<PiecewiseQuadratic, Quadratic, LogCoshShape>;

/// Declared smoothness constants. An empty `Q` means the third derivative is
/// unbounded (the piecewise quadratic's kink).
struct ObjectiveConstants {
  double H = 0.0;
  std::optional<double> Q;
  double sigma = 0.0;
  double x_star = 0.0;
};

/// Scalar stochastic objective: f(x; xi) = F(x) + xi * x, so the stochastic
/// gradient is F'(x) + xi. Immutable and holds no RNG state.
class Objective1D {
 public:
  Objective1D(std::string name, ObjectiveShape shape, NoiseModel noise,
              ObjectiveConstants constants);

  double value(double x) const;
  double mean_grad(double x) const;
  double stoch_grad(double x, double noise) const { return mean_grad(x) + noise; }
  double hess(double x) const;
  double third(double x) const;

  const std::string& name() const { return name_; }
  const ObjectiveShape& shape() const { return shape_; }
  const NoiseModel& noise() const { return noise_; }
  const ObjectiveConstants& constants() const { return constants_; }
  double x_star() const { return constants_.x_star; }

  /// Same shape and constants, different noise.
  Objective1D with_noise(NoiseModel noise) const;

 private:
  std::string name_;
  ObjectiveShape shape_;
  NoiseModel noise_;
  ObjectiveConstants constants_;
};

struct ClientObjective {
  Objective1D objective;
  NoiseModel noise;
  int client_tag = 0;
  /// RNG stream used for this client's draws. When unset the client's
  /// position in the client list is used.
  std::optional<std::uint32_t> stream_id;
};

/// Coordinate-separable objective: value is the sum over coordinates and the
/// gradient is the per-coordinate gradient vector.
struct CompositeObjective {
  std::vector<Objective1D> coords;

  double value(std::span<const double> x) const;
  std::vector<double> mean_grad(std::span<const double> x) const;
};

Objective1D make_piecewise_quadratic(double h_right, double h_left, double sigma);
Objective1D make_logcosh_instance(double H, double Q, double sigma,
                                  NoiseKind noise_kind = NoiseKind::gaussian);
/// The log-cosh instance reflected through the optimum: F'''(0) = -Q.
Objective1D make_mirrored_logcosh_instance(double H, double Q, double sigma,
                                           NoiseKind noise_kind = NoiseKind::gaussian);
Objective1D make_quadratic(double L, double sigma);
/// F = 0 with Gaussian gradient noise; iterates perform a random walk.
Objective1D make_flat(double sigma);

/// Deterministic heterogeneous pair. Client 1 follows x <- x(1 - eta H) + eta zeta,
/// client 2 follows x <- x(1 - eta H/2) - eta zeta.
std::vector<ClientObjective> make_hetero_pair(double H, double zeta_star);

/// Alternates the two members of a heterogeneous pair over M clients (odd
/// clients get the first, even clients the second, counting from 1).
std::vector<ClientObjective> alternate_clients(const std::vector<ClientObjective>& kinds, int M);

/// Wraps a single homogeneous objective as M identical clients.
std::vector<ClientObjective> homogeneous_clients(const Objective1D& obj, int M);

/// (1/M) sum_m F_m'(x_star)^2.
double heterogeneity_at(const std::vector<ClientObjective>& clients, double x_star);

/// Three-coordinate lower-bound instance: a piecewise quadratic with curvatures
/// (L, L/2) and Gaussian noise, a noiseless mu x^2, and either the
/// heterogeneous pair or the noiseless curvature-H quadratic.
struct LowerBoundComposite {
  double H = 0.0;
  double L = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double zeta_star = 0.0;
  double D = 0.0;
  std::vector<CompositeObjective> client_kinds;  // size 1 if homogeneous, else 2
  std::vector<double> x0;

  bool homogeneous() const { return client_kinds.size() == 1; }
  /// Clients for one coordinate, alternating kinds over M clients.
  std::vector<ClientObjective> coordinate_clients(std::size_t coord, int M) const;
  /// Averaged objective value over client kinds.
  double value(std::span<const double> x) const;
  double optimal_value() const;
};

/// mu = max(min(sigma D / sqrt(KR), H^(1/3) sigma^(2/3) D^(4/3) / (K^(1/3) R^(2/3))),
///          H^(1/3) zeta^(2/3) D^(4/3) / R^(2/3), H D^2 / (KR)) / D^2.
double lowerbound_mu(double H, double sigma, double zeta_star, double D, int K, int R);

/// L defaults to H/12.
LowerBoundComposite make_lowerbound_composite(double H, double mu, double sigma,
                                              double zeta_star, double D,
                                              std::optional<double> L = std::nullopt);

}  // namespace localsgd
