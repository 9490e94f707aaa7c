#include "localsgd/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "localsgd/errors.hpp"

namespace localsgd {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// (1 - q)^t for small q without losing digits.
double pow1m(double q, double t) { return std::exp(t * std::log1p(-q)); }

// 1 - (1 - q)^t.
double one_minus_pow1m(double q, double t) { return -std::expm1(t * std::log1p(-q)); }

}  // namespace

QuadDistribution quad_sgd_distribution(double L, double sigma, double eta, double x0, std::int64_t t) {
  if (t < 0) throw InvalidParameter("quad_sgd_distribution: t must be >= 0");
  const double q = eta * L;
  if (!(q > 0.0 && q < 1.0)) throw OutOfRegime("0 < eta L < 1 (eta L = " + num(q) + ")");
  QuadDistribution d;
  d.mean = std::pow(1.0 - q, static_cast<double>(t)) * x0;
  // sum_{j<t} (1 - q)^(2j) = (1 - (1-q)^(2t)) / (q (2 - q))
  d.variance = eta * eta * sigma * sigma * one_minus_pow1m(q, 2.0 * static_cast<double>(t)) / (q * (2.0 - q));
  return d;
}

QuadDistribution quad_sgd_distribution_literal(double L, double sigma, double eta, double x0,
                                               std::int64_t t) {
  QuadDistribution d = quad_sgd_distribution(L, sigma, eta, x0, t);
  const double q = eta * L;
  d.variance = one_minus_pow1m(q, static_cast<double>(t)) * eta * eta * sigma * sigma / q;
  return d;
}

KeyScales key_scales(double eta, double L, std::int64_t k) {
  const double q = eta * L;
  if (!(q > 0.0 && q <= 1.0 / 6.0)) throw OutOfRegime("0 < eta L <= 1/6 (eta L = " + num(q) + ")");
  if (k < 1) throw OutOfRegime("k >= 1");
  KeyScales s;
  s.alpha_y = 1.0 - q / 2.0;
  s.alpha_z = 1.0 - q;
  const double kk = static_cast<double>(k);
  s.sigma_y = std::sqrt(eta * eta * one_minus_pow1m(q / 2.0, kk) / (q / 2.0));
  s.sigma_z = std::sqrt(eta * eta * one_minus_pow1m(q, kk) / q);
  return s;
}

double sigma_gap_lower(double eta, double L, double sigma, std::int64_t k) {
  const double q = eta * L;
  if (!(q > 0.0 && q <= 1.0 / 6.0)) throw OutOfRegime("0 < eta L <= 1/6 (eta L = " + num(q) + ")");
  if (k < 2) throw OutOfRegime("k >= 2");
  const double kk = static_cast<double>(k);
  if (q * kk <= 0.5) return eta * eta * L * sigma * std::pow(kk, 1.5) / 24.0;
  return 0.12 * eta * sigma / std::sqrt(q);
}

BiasEnvelope bias_envelope_2o(double eta, double H, double sigma, std::int64_t k) {
  if (!(eta > 0.0 && H > 0.0 && sigma >= 0.0) || k < 1)
    throw InvalidParameter("bias_envelope_2o: need eta, H > 0, sigma >= 0, k >= 1");
  const double kk = static_cast<double>(k);
  BiasEnvelope e;
  e.upper.value = std::min(4.0 * eta * eta * std::pow(kk, 1.5) * H * sigma, eta * std::sqrt(kk) * sigma);
  if (eta > 1.0 / H) {
    e.upper.valid = false;
    e.upper.hypothesis = "eta <= 1/H";
  }
  e.lower.value = 0.002 * std::min(eta * eta * std::pow(kk, 1.5) * H * sigma, std::sqrt(eta / H) * sigma);
  if (k < 2) {
    e.lower.valid = false;
    e.lower.hypothesis = "k >= 2";
  } else if (eta > 1.0 / (2.0 * H)) {
    e.lower.valid = false;
    e.lower.hypothesis = "eta <= 1/(2H)";
  }
  return e;
}

BiasEnvelope bias_envelope_3o(double eta, double H, double Q, double sigma, std::int64_t k,
                              std::optional<std::int64_t> horizon) {
  if (!(eta > 0.0 && H > 0.0 && Q >= 0.0 && sigma >= 0.0) || k < 1)
    throw InvalidParameter("bias_envelope_3o: need eta, H > 0, Q, sigma >= 0, k >= 1");
  const double kk = static_cast<double>(k);
  const double K = static_cast<double>(horizon.value_or(k));
  BiasEnvelope e;
  e.upper.value = std::min({0.25 * eta * eta * eta * kk * kk * Q * sigma * sigma,
                            4.0 * eta * eta * std::pow(kk, 1.5) * H * sigma, eta * std::sqrt(kk) * sigma});
  if (eta > 1.0 / H) {
    e.upper.valid = false;
    e.upper.hypothesis = "eta <= 1/H";
  }
  e.lower.value = 0.005 * eta * eta * eta * sigma * sigma * Q * std::min((kk - 1.0) / (eta * H), kk * (kk - 1.0));
  if (k < 2) {
    e.lower.valid = false;
    e.lower.hypothesis = "k >= 2";
  } else if (eta > 1.0 / (2.0 * H)) {
    e.lower.valid = false;
    e.lower.hypothesis = "eta <= 1/(2H)";
  } else if (sigma > 0.0 && Q > H * H / (12.0 * K * sigma)) {
    e.lower.valid = false;
    e.lower.hypothesis = "Q <= H^2/(12 K sigma)";
  }
  return e;
}

double HeteroRoundMap::iterate(double x0, double zeta, std::int64_t R) const {
  double x = x0;
  for (std::int64_t r = 0; r < R; ++r) x = apply(x, zeta);
  return x;
}

HeteroRoundMap hetero_round_map(double H, double eta, std::int64_t K) {
  const double q = eta * H;
  if (!(q > 0.0 && q < 1.0)) throw OutOfRegime("0 < eta H < 1 (eta H = " + num(q) + ")");
  if (K < 1) throw InvalidParameter("hetero_round_map: K must be >= 1");
  const double mu = H / 2.0;
  const double kk = static_cast<double>(K);
  HeteroRoundMap m;
  m.a = 0.5 * (pow1m(q, kk) + pow1m(q / 2.0, kk));
  if (K <= (1 << 20)) {
    // b = (eta/2) sum_{j<K} ((1 - eta H)^j - (1 - eta mu)^j); exact zero at K = 1.
    const double ah = 1.0 - q, am = 1.0 - eta * mu;
    double ph = 1.0, pm = 1.0, acc = 0.0;
    for (std::int64_t j = 0; j < K; ++j) {
      acc += ph - pm;
      ph *= ah;
      pm *= am;
    }
    m.b = 0.5 * eta * acc;
  } else {
    m.b = 0.5 * (one_minus_pow1m(q, kk) / H - one_minus_pow1m(q / 2.0, kk) / mu);
  }
  return m;
}

HeteroRoundMap hetero_round_map_literal(double H, double eta, std::int64_t K) {
  HeteroRoundMap m = hetero_round_map(H, eta, K);
  const double mu = H / 2.0;
  const double kk = static_cast<double>(K);
  m.b = 0.5 * (1.0 / H - pow1m(eta * H, kk) - 1.0 / mu + pow1m(eta * mu, kk));
  return m;
}

double homog_drift_bound(double eta, double L, double sigma, std::int64_t K, std::int64_t R) {
  const double q = eta * L;
  if (!(q > 0.0 && q <= 1.0 / 6.0)) throw OutOfRegime("0 < eta L <= 1/6 (eta L = " + num(q) + ")");
  if (K < 1 || R < 0) throw InvalidParameter("homog_drift_bound: K >= 1 and R >= 0 required");
  if (R == 0) return 0.0;
  const double s = q * static_cast<double>(K);
  const double m = std::min({static_cast<double>(R) * std::pow(s, 1.5), 1.0, std::sqrt(s)});
  return -0.0005 * std::sqrt(eta / L) * sigma * m;
}

double hetero_drift_bound(double eta, double H, double zeta_star, std::int64_t K, std::int64_t R,
                          double c_h) {
  const double q = eta * H;
  if (!(q > 0.0 && q <= 1.0)) throw OutOfRegime("0 < eta H <= 1 (eta H = " + num(q) + ")");
  if (!(c_h > 0.0)) throw InvalidParameter("hetero_drift_bound: c_h must be positive");
  const double s = q * static_cast<double>(K);
  return -(c_h / H) * std::min({1.0, s, s * s * static_cast<double>(R)}) * zeta_star;
}

StepWindow expected_step_window(double eta, double L, double sigma, std::int64_t k) {
  const KeyScales s = key_scales(eta, L, k);
  StepWindow w;
  w.lo = -std::sqrt(0.0005) * s.sigma_y * sigma / std::pow(s.alpha_y, static_cast<double>(k));
  w.hi = 0.0;
  return w;
}

double expected_step_bound(double eta, double L, double sigma, std::int64_t k, double e0) {
  const StepWindow w = expected_step_window(eta, L, sigma, k);
  if (e0 < w.lo || e0 > w.hi)
    throw OutOfRegime("e0 in [" + num(w.lo) + ", " + num(w.hi) + "] (e0 = " + num(e0) + ")");
  const double q = eta * L;
  const double drift = 0.5 * 0.002 * sigma * std::sqrt(eta / L) * std::pow(std::min(1.0, q * static_cast<double>(k)), 1.5);
  return std::pow(1.0 - q / 2.0, static_cast<double>(k)) * e0 - drift;
}

}  // namespace localsgd
