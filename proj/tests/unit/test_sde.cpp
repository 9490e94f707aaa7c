#include "localsgd/sde.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "localsgd/errors.hpp"

using namespace localsgd;

TEST(TaylorCoeffs, Examples) {
  const auto q = taylor_coeffs_predicted(make_quadratic(1.0, 1.0), 2.0, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(q.u_t, -2.0);
  EXPECT_DOUBLE_EQ(q.u_tt, 2.0);
  const auto lc = make_logcosh_instance(1.0, 0.5, 1.0);
  const auto c = taylor_coeffs_predicted(lc, 0.0, 0.1, 1.0);
  EXPECT_EQ(c.u_t, 0.0);
  EXPECT_NEAR(c.u_tt, -0.05, 1e-15);
  EXPECT_NEAR(taylor_coeffs_predicted(lc, 0.0, 0.1, 1.0, DiffusionConvention::ito).u_tt, -0.025, 1e-15);
  for (double x : {-1.0, 0.3, 2.0}) {
    const auto z = taylor_coeffs_predicted(lc, x, 0.1, 0.0);
    EXPECT_DOUBLE_EQ(z.u_tt, lc.mean_grad(x) * lc.hess(x));
  }
  const auto opt = taylor_coeffs_predicted(make_quadratic(1.0, 0.0), 0.0, 0.1, 0.0);
  EXPECT_EQ(opt.u_t, 0.0);
  EXPECT_EQ(opt.u_tt, 0.0);
}

TEST(EulerMaruyama, StepEqualsEtaReplaysSgd) {
  const auto lc = make_logcosh_instance(1.0, 0.5, 1.0);
  const RngKey key{9, 3, 2};
  const auto a = euler_maruyama(lc, 0.4, 0.1, 0.1, 50, key, 1.0, CheckpointPolicy::full);
  const auto b = run_sgd(lc, 0.4, 0.1, 50, key, 1.0, CheckpointPolicy::full);
  ASSERT_EQ(a.checkpoints.size(), b.checkpoints.size());
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) EXPECT_EQ(a.checkpoints[i].value, b.checkpoints[i].value);
}

TEST(EulerMaruyama, NoiselessQuadraticFollowsOde) {
  const auto a = euler_maruyama(make_quadratic(1.0, 0.0), 1.0, 0.1, 1e-3, 1000, RngKey{});
  EXPECT_LE(std::fabs(a.final_value() - std::exp(-1.0)), 5e-4);
}

TEST(EulerMaruyama, BrownianVariance) {
  const auto flat = make_flat(1.0);
  const double eta = 0.1, T = 1.0;
  WelfordState s;
  for (std::uint32_t r = 0; r < 40000; ++r)
    s.add(euler_maruyama(flat, 0.0, eta, 0.05, 20, RngKey{3}.with_replica(r)).final_value());
  EXPECT_NEAR(s.variance() / (eta * T), 1.0, 0.03);
}

TEST(EulerMaruyama, RejectsNonGaussianNoise) {
  EXPECT_THROW(euler_maruyama(make_logcosh_instance(1, 0.5, 1, NoiseKind::uniform), 0, 0.1, 0.01, 5, RngKey{}),
               InvalidParameter);
  EXPECT_THROW(euler_maruyama(make_quadratic(1, 1), 0, 0.1, 0.0, 5, RngKey{}), InvalidParameter);
}

TEST(Backward, QuadraticAtOptimumIsFlat) {
  const auto q = make_quadratic(1.0, 1.0);
  const auto anti = check_backward_expansion(q, 0.0, 0.1, default_t_grid(), 20000, RngKey{5});
  EXPECT_EQ(anti.u_t.mean, 0.0);
  EXPECT_EQ(anti.u_tt.mean, 0.0);
  BackwardOptions plain;
  plain.antithetic = false;
  const auto p = check_backward_expansion(q, 0.0, 0.1, default_t_grid(), 20000, RngKey{5}, plain);
  EXPECT_TRUE(p.u_t.within(0.0, 4.0));
  EXPECT_TRUE(p.u_tt.within(0.0, 4.0));
}

TEST(Backward, LogCoshCurvatureMatchesItoGenerator) {
  const auto lc = make_logcosh_instance(1.0, 0.5, 1.0);
  const auto r = check_backward_expansion(lc, 0.0, 0.1, default_t_grid(), 400000, RngKey{5, 1});
  EXPECT_NEAR(r.predicted.u_tt, -0.05, 1e-15);
  // The measured coefficient is half the unhalved prediction.
  EXPECT_NEAR(r.u_tt.mean / -0.025, 1.0, 0.05);
  EXPECT_GT(std::fabs(r.u_tt.mean - r.predicted.u_tt), 10 * r.u_tt.std_error);
}

TEST(Backward, MirroredInstanceNegatesCurvature) {
  const auto a = check_backward_expansion(make_logcosh_instance(1.0, 0.5, 1.0), 0.0, 0.1, default_t_grid(), 200000,
                                          RngKey{5, 2});
  const auto b = check_backward_expansion(make_mirrored_logcosh_instance(1.0, 0.5, 1.0), 0.0, 0.1, default_t_grid(),
                                          200000, RngKey{5, 2});
  EXPECT_LE(std::fabs(a.u_tt.mean + b.u_tt.mean), 1.96 * std::hypot(a.u_tt.std_error, b.u_tt.std_error) + 1e-15);
}

TEST(Backward, HalvingStepKeepsMeanWithinInterval) {
  const auto lc = make_logcosh_instance(1.0, 0.5, 1.0);
  BackwardOptions coarse;
  coarse.antithetic = false;
  BackwardOptions fine = coarse;
  fine.dt = 0.005;
  const auto a = check_backward_expansion(lc, 0.0, 0.1, default_t_grid(), 100000, RngKey{5, 3}, coarse);
  const auto b = check_backward_expansion(lc, 0.0, 0.1, default_t_grid(), 100000, RngKey{5, 4}, fine);
  const auto& ua = a.points.back().u;
  const auto& ub = b.points.back().u;
  EXPECT_LE(std::fabs(ua.mean - ub.mean), 3.0 * std::hypot(ua.std_error, ub.std_error));
}

TEST(Backward, Gates) {
  const auto lc = make_logcosh_instance(1.0, 0.5, 1.0);
  EXPECT_THROW(check_backward_expansion(lc, 0.0, 0.1, {0.1, 0.2, 0.3}, 1000, RngKey{}), OutOfRegime);
  EXPECT_THROW(check_backward_expansion(lc, 0.0, 0.1, {0.05, 0.1, 0.125}, 1000, RngKey{}), InvalidParameter);
  BackwardOptions strict;
  strict.relative_tolerance = 0.1;
  try {
    check_backward_expansion(lc, 0.0, 0.1, default_t_grid(), 200, RngKey{}, strict);
    FAIL();
  } catch (const Inconclusive& e) {
    EXPECT_GT(e.required_n(), 200u);
  }
}

TEST(DiscreteBias, MatchesItoPredictionWithFiniteStepCorrection) {
  // E[x^(k)] - z^(k) ~ -eta^3 sigma^2 Q k(k-1) / 4 at the log-cosh optimum.
  const auto lc = make_logcosh_instance(1.0, 0.5, 1.0);
  const double eta = 0.02;
  const std::int64_t k = 5;
  const auto b = estimate_bias(lc, 0.0, eta, {k}, 400000, EstimatorMode::antithetic, RngKey{5, 5});
  const double ito = predicted_discrete_bias(lc, 0.0, eta, 1.0, k, DiffusionConvention::ito);
  EXPECT_NEAR(b[0].bias.mean / ito, static_cast<double>(k - 1) / k, 0.15 * (k - 1) / k);
  EXPECT_NEAR(predicted_discrete_bias(lc, 0.0, eta, 1.0, k), 2 * ito, 1e-18);
}
