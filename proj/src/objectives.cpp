#include "localsgd/objectives.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>

#include "localsgd/errors.hpp"
#include "localsgd/rng.hpp"

namespace localsgd {

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gaussian:
      return "gaussian";
    case NoiseKind::uniform:
      return "uniform";
    case NoiseKind::point_mass:
      return "point_mass";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "uniform") return NoiseKind::uniform;
  if (name == "point_mass") return NoiseKind::point_mass;
  throw InvalidParameter("unknown noise kind '" + std::string(name) + "'");
}

double NoiseModel::variance() const {
  switch (kind) {
    case NoiseKind::gaussian:
      return scale * scale;
    case NoiseKind::uniform:
      return scale * scale / 3.0;
    case NoiseKind::point_mass:
      return 0.0;
  }
  return 0.0;
}

double NoiseModel::from_uniform(double u, double sign) const {
  switch (kind) {
    case NoiseKind::gaussian:
      return sign * (scale * inverse_normal_cdf(u));
    case NoiseKind::uniform:
      return sign * (scale * (2.0 * u - 1.0));
    case NoiseKind::point_mass:
      return scale;
  }
  return 0.0;
}

double integrated_log_cosh(double y) {
  if (y == 0.0) return 0.0;
  const double a = std::fabs(y);
  // Composite 30-point Gauss-Legendre on unit panels up to 20; past that
  // log cosh(s) = s - log 2 to within e^-40, so the tail is integrated exactly.
  constexpr double kSplit = 20.0;
  const double upto = std::min(a, kSplit);
  double integral = 0.0;
  for (double lo = 0.0; lo < upto; lo += 1.0) {
    const double hi = std::min(lo + 1.0, upto);
    integral += boost::math::quadrature::gauss<double, 30>::integrate([](double s) { return log_cosh(s); }, lo, hi);
  }
  if (a > kSplit) integral += 0.5 * (a - kSplit) * (a + kSplit) - 0.69314718055994530942 * (a - kSplit);
  return y < 0.0 ? -integral : integral;
}

Objective1D::Objective1D(std::string name, ObjectiveShape shape, NoiseModel noise,
                         ObjectiveConstants constants)
    : name_(std::move(name)), shape_(shape), noise_(noise), constants_(constants) {}

double Objective1D::value(double x) const {
  return std::visit([x](const auto& s) { return s.value(x); }, shape_);
}
double Objective1D::mean_grad(double x) const {
  return std::visit([x](const auto& s) { return s.grad(x); }, shape_);
}
double Objective1D::hess(double x) const {
  return std::visit([x](const auto& s) { return s.hess(x); }, shape_);
}
double Objective1D::third(double x) const {
  return std::visit([x](const auto& s) { return s.third(x); }, shape_);
}

Objective1D Objective1D::with_noise(NoiseModel noise) const {
  ObjectiveConstants c = constants_;
  c.sigma = std::sqrt(noise.variance());
  return Objective1D(name_, shape_, noise, c);
}

double CompositeObjective::value(std::span<const double> x) const {
  if (x.size() != coords.size()) throw InvalidParameter("composite: dimension mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < coords.size(); ++i) total += coords[i].value(x[i]);
  return total;
}

std::vector<double> CompositeObjective::mean_grad(std::span<const double> x) const {
  if (x.size() != coords.size()) throw InvalidParameter("composite: dimension mismatch");
  std::vector<double> g(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) g[i] = coords[i].mean_grad(x[i]);
  return g;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidParameter(what);
}

}  // namespace

Objective1D make_piecewise_quadratic(double h_right, double h_left, double sigma) {
  require(h_right > 0.0 && h_left > 0.0, "piecewise quadratic: curvatures must be positive");
  require(sigma >= 0.0, "piecewise quadratic: sigma must be non-negative");
  return Objective1D("piecewise", PiecewiseQuadratic{h_right, h_left}, NoiseModel::gaussian(sigma),
                     {std::max(h_right, h_left), std::nullopt, sigma, 0.0});
}

namespace {

Objective1D logcosh_impl(double H, double Q, double sigma, NoiseKind kind, double orientation) {
  require(H > 0.0 && Q > 0.0, "logcosh instance: H and Q must be positive");
  require(sigma >= 0.0, "logcosh instance: sigma must be non-negative");
  require(kind != NoiseKind::point_mass, "logcosh instance: noise must be gaussian or uniform");
  const NoiseModel noise =
      kind == NoiseKind::gaussian ? NoiseModel::gaussian(sigma) : NoiseModel::uniform(sigma);
  return Objective1D(orientation > 0 ? "logcosh" : "logcosh_mirrored",
                     LogCoshShape{H, Q, orientation}, noise, {H, Q, sigma, 0.0});
}

}  // namespace

Objective1D make_logcosh_instance(double H, double Q, double sigma, NoiseKind noise_kind) {
  return logcosh_impl(H, Q, sigma, noise_kind, 1.0);
}

Objective1D make_mirrored_logcosh_instance(double H, double Q, double sigma, NoiseKind noise_kind) {
  return logcosh_impl(H, Q, sigma, noise_kind, -1.0);
}

Objective1D make_quadratic(double L, double sigma) {
  require(L > 0.0, "quadratic: curvature must be positive");
  require(sigma >= 0.0, "quadratic: sigma must be non-negative");
  return Objective1D("quadratic", Quadratic{L, 0.0}, NoiseModel::gaussian(sigma),
                     {L, 0.0, sigma, 0.0});
}

Objective1D make_flat(double sigma) {
  require(sigma >= 0.0, "flat: sigma must be non-negative");
  return Objective1D("flat", Quadratic{0.0, 0.0}, NoiseModel::gaussian(sigma), {0.0, 0.0, sigma, 0.0});
}

std::vector<ClientObjective> make_hetero_pair(double H, double zeta_star) {
  require(H > 0.0, "hetero pair: H must be positive");
  require(zeta_star >= 0.0, "hetero pair: zeta_star must be non-negative");
  const double mu = 0.5 * H;
  // Client k's own optimum is +zeta/H or -zeta/mu; the shared optimum of the
  // average is 0.
  Objective1D first("hetero_pair/1", Quadratic{H, zeta_star}, NoiseModel::point_mass(),
                    {H, 0.0, 0.0, 0.0});
  Objective1D second("hetero_pair/2", Quadratic{mu, -zeta_star}, NoiseModel::point_mass(),
                     {mu, 0.0, 0.0, 0.0});
  return {ClientObjective{first, first.noise(), 1, std::nullopt}, ClientObjective{second, second.noise(), 2, std::nullopt}};
}

std::vector<ClientObjective> alternate_clients(const std::vector<ClientObjective>& kinds, int M) {
  require(!kinds.empty(), "alternate_clients: no client kinds");
  require(M >= 1, "alternate_clients: M must be >= 1");
  std::vector<ClientObjective> out;
  out.reserve(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) out.push_back(kinds[static_cast<std::size_t>(m) % kinds.size()]);
  return out;
}

std::vector<ClientObjective> homogeneous_clients(const Objective1D& obj, int M) {
  return alternate_clients({ClientObjective{obj, obj.noise(), 0, std::nullopt}}, M);
}

double heterogeneity_at(const std::vector<ClientObjective>& clients, double x_star) {
  require(!clients.empty(), "heterogeneity_at: no clients");
  double acc = 0.0;
  for (const auto& c : clients) {
    const double g = c.objective.mean_grad(x_star);
    acc += g * g;
  }
  return acc / static_cast<double>(clients.size());
}

double lowerbound_mu(double H, double sigma, double zeta_star, double D, int K, int R) {
  require(H > 0.0 && D > 0.0 && K >= 1 && R >= 1, "lowerbound_mu: invalid parameters");
  const double k = K, r = R;
  const double noise_term =
      std::min(sigma * D / std::sqrt(k * r),
               std::cbrt(H) * std::pow(sigma, 2.0 / 3.0) * std::pow(D, 4.0 / 3.0) /
                   (std::cbrt(k) * std::pow(r, 2.0 / 3.0)));
  const double hetero_term =
      std::cbrt(H) * std::pow(zeta_star, 2.0 / 3.0) * std::pow(D, 4.0 / 3.0) / std::pow(r, 2.0 / 3.0);
  const double det_term = H * D * D / (k * r);
  return std::max({noise_term, hetero_term, det_term}) / (D * D);
}

LowerBoundComposite make_lowerbound_composite(double H, double mu, double sigma, double zeta_star,
                                              double D, std::optional<double> L) {
  require(H > 0.0, "lowerbound composite: H must be positive");
  require(mu > 0.0, "lowerbound composite: mu must be positive");
  require(mu <= H, "lowerbound composite: mu must not exceed H");
  require(sigma >= 0.0 && zeta_star >= 0.0, "lowerbound composite: sigma, zeta must be >= 0");
  require(D > 0.0, "lowerbound composite: D must be positive");
  const double ell = L.value_or(H / 12.0);
  require(ell > 0.0, "lowerbound composite: L must be positive");

  LowerBoundComposite out;
  out.H = H;
  out.L = ell;
  out.mu = mu;
  out.sigma = sigma;
  out.zeta_star = zeta_star;
  out.D = D;
  out.x0 = {0.0, D / 2.0, D / 2.0};

  const Objective1D step = make_piecewise_quadratic(ell, ell / 2.0, sigma);
  // mu x^2 has gradient 2 mu x.
  const Objective1D slow("slow_quadratic", Quadratic{2.0 * mu, 0.0}, NoiseModel::point_mass(),
                         {2.0 * mu, 0.0, 0.0, 0.0});
  if (zeta_star == 0.0) {
    const Objective1D stiff("stiff_quadratic", Quadratic{H, 0.0}, NoiseModel::point_mass(),
                            {H, 0.0, 0.0, 0.0});
    out.client_kinds.push_back(CompositeObjective{{step, slow, stiff}});
  } else {
    const auto pair = make_hetero_pair(H, zeta_star);
    out.client_kinds.push_back(CompositeObjective{{step, slow, pair[0].objective}});
    out.client_kinds.push_back(CompositeObjective{{step, slow, pair[1].objective}});
  }
  return out;
}

std::vector<ClientObjective> LowerBoundComposite::coordinate_clients(std::size_t coord, int M) const {
  std::vector<ClientObjective> kinds;
  for (std::size_t i = 0; i < client_kinds.size(); ++i) {
    const auto& obj = client_kinds[i].coords.at(coord);
    kinds.push_back(ClientObjective{obj, obj.noise(), static_cast<int>(i) + 1, std::nullopt});
  }
  return alternate_clients(kinds, M);
}

double LowerBoundComposite::value(std::span<const double> x) const {
  double acc = 0.0;
  for (const auto& kind : client_kinds) acc += kind.value(x);
  return acc / static_cast<double>(client_kinds.size());
}

double LowerBoundComposite::optimal_value() const {
  const std::vector<double> origin(3, 0.0);
  return value(origin);
}

}  // namespace localsgd
