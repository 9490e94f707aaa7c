#include "localsgd/sde.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "localsgd/detail/kernels.hpp"
#include "localsgd/errors.hpp"
#include "localsgd/parallel.hpp"

namespace localsgd {

std::string_view to_string(DiffusionConvention c) { return c == DiffusionConvention::ito ? "ito" : "unhalved"; }

DiffusionConvention parse_diffusion_convention(std::string_view name) {
  if (name == "ito") return DiffusionConvention::ito;
  if (name == "unhalved") return DiffusionConvention::unhalved;
  throw InvalidParameter("unknown diffusion convention '" + std::string(name) + "'");
}

namespace {

double diffusion_factor(DiffusionConvention c) { return c == DiffusionConvention::ito ? 0.5 : 1.0; }

void check_sde_noise(const Objective1D& obj) {
  const auto& nz = obj.noise();
  if (nz.kind != NoiseKind::gaussian && nz.scale != 0.0)
    throw InvalidParameter("SDE simulation needs Gaussian gradient noise (objective '" + obj.name() + "' uses " +
                           std::string(to_string(nz.kind)) + ")");
}

// Same arithmetic as detail::sgd_steps with the drift and diffusion step
// sizes split.
template <class Shape, class Draw, class Observer>
double em_steps(const Shape& shape, const Draw& draw, double x, double dt, double diff,
                const detail::StreamSlot& slot, std::uint32_t first_step, std::uint32_t steps,
                Observer&& observe) {
  for (std::uint32_t j = 0; j < steps; ++j) {
    const double g = shape.grad(x);
    const double xi = draw(slot, first_step + j);
    x = x - dt * g - diff * xi;
    if (detail::escaped(x)) throw DivergedError(static_cast<std::int64_t>(j) + 1);
    observe(j + 1, x);
  }
  return x;
}

double diffusion_step(double eta, double dt) { return dt == eta ? eta : std::sqrt(eta * dt); }

}  // namespace

TaylorCoeffs taylor_coeffs_predicted(const Objective1D& obj, double x, double eta, double sigma,
                                     DiffusionConvention convention) {
  const double g = obj.mean_grad(x);
  TaylorCoeffs c;
  c.u_t = -g;
  c.u_tt = g * obj.hess(x) - diffusion_factor(convention) * eta * sigma * sigma * obj.third(x);
  return c;
}

double predicted_discrete_bias(const Objective1D& obj, double x, double eta, double sigma, std::int64_t k,
                               DiffusionConvention convention) {
  const double t = eta * static_cast<double>(k);
  return -0.5 * diffusion_factor(convention) * eta * sigma * sigma * obj.third(x) * t * t;
}

Trajectory euler_maruyama(const Objective1D& obj, double x0, double eta, double dt, std::int64_t steps,
                          const RngKey& key, double antithetic_sign, CheckpointPolicy policy) {
  if (!(dt > 0.0)) throw InvalidParameter("euler_maruyama: dt must be positive");
  if (!(eta > 0.0)) throw InvalidParameter("euler_maruyama: eta must be positive");
  detail::check_steps(steps);
  check_sde_noise(obj);
  Trajectory out;
  out.checkpoints.push_back({0, x0});
  const KeyedStream stream(key);
  const detail::StreamSlot slot{key.replica, key.client, key.round};
  const double diff = diffusion_step(eta, dt);
  auto observe = [&](std::uint32_t j, double x) {
    if (policy == CheckpointPolicy::full || detail::keep_sparse(j, steps)) out.checkpoints.push_back({j, x});
  };
  detail::with_kernel(obj.shape(), obj.noise(), stream, antithetic_sign, [&](const auto& shape, const auto& draw) {
    return em_steps(shape, draw, x0, dt, diff, slot, key.step, static_cast<std::uint32_t>(steps), observe);
  });
  return out;
}

std::vector<double> default_t_grid() { return {0.05, 0.1, 0.15, 0.2}; }

namespace {

struct BackwardAcc {
  std::vector<WelfordState> u;
  WelfordState u_t;
  WelfordState u_tt;
};

}  // namespace

BackwardCheck check_backward_expansion(const Objective1D& obj, double x, double eta,
                                       const std::vector<double>& t_grid, std::uint64_t n, const RngKey& key,
                                       const BackwardOptions& opts) {
  if (!(opts.dt > 0.0)) throw InvalidParameter("check_backward_expansion: dt must be positive");
  check_sde_noise(obj);
  const std::size_t cols = opts.cubic_nuisance ? 3 : 2;
  if (t_grid.size() < cols)
    throw InvalidParameter("check_backward_expansion: need at least " + std::to_string(cols) + " time points");
  if (n < 2 || (opts.antithetic && n % 2 != 0))
    throw InvalidParameter("check_backward_expansion: n must be >= 2 (even when antithetic)");

  std::vector<double> ts = t_grid;
  std::sort(ts.begin(), ts.end());
  if (std::adjacent_find(ts.begin(), ts.end()) != ts.end() || !(ts.front() > 0.0))
    throw InvalidParameter("check_backward_expansion: times must be positive and distinct");
  const double H = obj.constants().H;
  const double gate = ts.back() * (H + std::fabs(obj.mean_grad(x)));
  if (gate > 0.2) {
    std::ostringstream os;
    os << "max(t) (H + |F'(x)|) <= 0.2 (got " << gate << ")";
    throw OutOfRegime(os.str());
  }
  std::vector<std::uint32_t> steps;
  for (double t : ts) {
    const double s = std::round(t / opts.dt);
    if (std::fabs(s * opts.dt - t) > 1e-9 * t)
      throw InvalidParameter("check_backward_expansion: every t must be a multiple of dt");
    steps.push_back(static_cast<std::uint32_t>(s));
  }

  // Per-path least-squares functional: beta = A (u - x).
  const std::size_t m = ts.size();
  Eigen::MatrixXd X(m, cols);
  Eigen::VectorXd w(m);
  for (std::size_t i = 0; i < m; ++i) {
    X(i, 0) = ts[i];
    X(i, 1) = 0.5 * ts[i] * ts[i];
    if (cols == 3) X(i, 2) = ts[i] * ts[i] * ts[i];
    w(i) = 1.0 / ts[i];
  }
  const Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
  const Eigen::MatrixXd A = (XtW * X).ldlt().solve(XtW);

  const KeyedStream stream(key);
  const double diff = diffusion_step(eta, opts.dt);
  const std::uint64_t units = opts.antithetic ? n / 2 : n;
  auto shard = [&](std::uint64_t, std::uint64_t begin, std::uint64_t end) {
    BackwardAcc acc{std::vector<WelfordState>(m), {}, {}};
    std::vector<double> plus(m), minus(m), y(m);
    detail::with_kernel(obj.shape(), obj.noise(), stream, 1.0, [&](const auto& shape, const auto& draw) {
      auto flipped = draw;
      flipped.sign = -1.0;
      auto run_one = [&](const auto& d, const detail::StreamSlot& slot, std::vector<double>& out) {
        std::size_t idx = 0;
        auto observe = [&](std::uint32_t j, double v) {
          if (idx < m && j == steps[idx]) out[idx++] = v;
        };
        em_steps(shape, d, x, opts.dt, diff, slot, 0, steps.back(), observe);
      };
      for (std::uint64_t u = begin; u < end; ++u) {
        const detail::StreamSlot slot{static_cast<std::uint32_t>(u), key.client, key.round};
        run_one(draw, slot, plus);
        if (opts.antithetic) {
          run_one(flipped, slot, minus);
          for (std::size_t i = 0; i < m; ++i) y[i] = 0.5 * (plus[i] + minus[i]);
        } else {
          y = plus;
        }
        double bt = 0.0, btt = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          acc.u[i].add(y[i]);
          bt += A(0, i) * (y[i] - x);
          btt += A(1, i) * (y[i] - x);
        }
        acc.u_t.add(bt);
        acc.u_tt.add(btt);
      }
    });
    return acc;
  };
  const auto shards = run_shards<BackwardAcc>(units, shard, opts.workers);

  BackwardAcc total{std::vector<WelfordState>(m), {}, {}};
  for (const auto& s : shards) {
    for (std::size_t i = 0; i < m; ++i) total.u[i].merge(s.u[i]);
    total.u_t.merge(s.u_t);
    total.u_tt.merge(s.u_tt);
  }

  BackwardCheck out;
  out.convention = opts.convention;
  for (std::size_t i = 0; i < m; ++i) out.points.push_back({ts[i], MonteCarloEstimate::from_state(total.u[i], n)});
  out.u_t = MonteCarloEstimate::from_state(total.u_t, n);
  out.u_tt = MonteCarloEstimate::from_state(total.u_tt, n);
  out.predicted = taylor_coeffs_predicted(obj, x, eta, std::sqrt(obj.noise().variance()), opts.convention);

  if (opts.relative_tolerance > 0.0 && out.predicted.u_tt != 0.0) {
    const double allowed = opts.relative_tolerance * std::fabs(out.predicted.u_tt);
    const double half = kZ95 * out.u_tt.std_error;
    if (half > allowed) {
      const double factor = (half / allowed) * (half / allowed);
      std::ostringstream os;
      os << "u_tt 95% half-width " << half << " exceeds " << allowed;
      throw Inconclusive(static_cast<std::uint64_t>(std::ceil(static_cast<double>(n) * factor)), os.str());
    }
  }
  return out;
}

CsvTable backward_table(const BackwardCheck& check) {
  CsvTable t({"t", "u_mean", "u_stderr"});
  for (const auto& p : check.points) t.add_row({p.t, p.u.mean, p.u.std_error});
  return t;
}

std::string backward_summary(const BackwardCheck& check) {
  std::ostringstream os;
  os << "convention: " << to_string(check.convention) << "\n"
     << "u_t_fitted: " << format_double(check.u_t.mean) << "\n"
     << "u_t_stderr: " << format_double(check.u_t.std_error) << "\n"
     << "u_t_predicted: " << format_double(check.predicted.u_t) << "\n"
     << "u_tt_fitted: " << format_double(check.u_tt.mean) << "\n"
     << "u_tt_stderr: " << format_double(check.u_tt.std_error) << "\n"
     << "u_tt_predicted: " << format_double(check.predicted.u_tt) << "\n";
  return os.str();
}

}  // namespace localsgd
