#include "localsgd/engine.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "localsgd/errors.hpp"

using namespace localsgd;

TEST(Gd, SingleQuadraticStep) {
  const auto t = run_gd(make_quadratic(1.0, 0.0), 1.0, 0.5, 1);
  EXPECT_EQ(t.final_value(), 0.5);
}

TEST(Gd, SlowCoordinateOfComposite) {
  const auto inst = make_lowerbound_composite(1.0, 1.0, 0.0, 0.0, 1.0);
  const auto& f2 = inst.client_kinds[0].coords[1];
  const auto t = run_gd(f2, 1.0, 0.1, 2);
  EXPECT_NEAR(t.final_value(), 0.64, 1e-15);
  EXPECT_NEAR(f2.value(t.final_value()), 0.4096, 1e-15);
}

TEST(Gd, ZeroStepsReturnsStart) {
  const auto t = run_gd(make_logcosh_instance(1.0, 0.5, 1.0), 0.37, 0.1, 0);
  ASSERT_EQ(t.checkpoints.size(), 1u);
  EXPECT_EQ(t.final_value(), 0.37);
  EXPECT_EQ(t.final_step(), 0);
}

TEST(Gd, DivergenceCarriesStep) {
  try {
    run_gd(make_quadratic(1.0, 0.0), 1.0, 3.0, 100);
    FAIL() << "expected divergence";
  } catch (const DivergedError& e) {
    // |1 - 3|^j = 2^j crosses 1e12 at j = 40.
    EXPECT_EQ(e.step(), 40);
  }
}

TEST(Gd, FullCheckpointsStrictlyIncreasing) {
  const auto t = run_gd(make_quadratic(1.0, 0.0), 1.0, 0.1, 17);
  ASSERT_EQ(t.checkpoints.size(), 18u);
  for (std::size_t i = 0; i < t.checkpoints.size(); ++i) EXPECT_EQ(t.checkpoints[i].step, static_cast<std::int64_t>(i));
}

TEST(Sgd, SparseCheckpoints) {
  const auto t = run_sgd(make_quadratic(1.0, 1.0), 0.0, 0.1, 20, RngKey{1});
  std::vector<std::int64_t> steps;
  for (const auto& c : t.checkpoints) steps.push_back(c.step);
  EXPECT_EQ(steps, (std::vector<std::int64_t>{0, 1, 2, 4, 8, 16, 20}));
  EXPECT_TRUE(t.at(16).has_value());
  EXPECT_FALSE(t.at(5).has_value());
}

TEST(Sgd, NoiselessEqualsGdBitwise) {
  const auto f = make_logcosh_instance(1.0, 0.5, 0.0);
  const auto a = run_sgd(f, 0.8, 0.05, 64, RngKey{3}, 1.0, CheckpointPolicy::full);
  const auto b = run_gd(f, 0.8, 0.05, 64);
  ASSERT_EQ(a.checkpoints.size(), b.checkpoints.size());
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) EXPECT_EQ(a.checkpoints[i].value, b.checkpoints[i].value);
}

TEST(Sgd, SameKeyReproduces) {
  const auto f = make_piecewise_quadratic(1.0, 0.5, 1.0);
  const RngKey key{11, 2, 5};
  const auto a = run_sgd(f, 0.0, 0.05, 100, key, 1.0, CheckpointPolicy::full);
  const auto b = run_sgd(f, 0.0, 0.05, 100, key, 1.0, CheckpointPolicy::full);
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) EXPECT_EQ(a.checkpoints[i].value, b.checkpoints[i].value);
  const auto c = run_sgd(f, 0.0, 0.05, 100, key.with_replica(6), 1.0, CheckpointPolicy::full);
  EXPECT_NE(a.final_value(), c.final_value());
}

TEST(Sgd, AntitheticFirstStepAveragesToGd) {
  for (const auto& f : {make_piecewise_quadratic(1.0, 0.5, 1.0), make_logcosh_instance(1.0, 0.5, 2.0)}) {
    const RngKey key{8, 1, 77};
    const double plus = run_sgd(f, 0.3, 0.1, 1, key, 1.0).final_value();
    const double minus = run_sgd(f, 0.3, 0.1, 1, key, -1.0).final_value();
    const double gd = run_gd(f, 0.3, 0.1, 1).final_value();
    EXPECT_NEAR(0.5 * (plus + minus), gd, 1e-16);
  }
}

TEST(Sgd, QuadraticMeanAndVarianceAtThreeSteps) {
  // Exact law: mean (1 - eta L)^t x0, variance eta^2 sigma^2 sum_j (1 - eta L)^(2j).
  const auto f = make_quadratic(1.0, 1.0);
  const int n = 1000000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = run_sgd(f, 1.0, 0.1, 3, RngKey{21, 0, static_cast<std::uint32_t>(i)}).final_value();
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  const double exact_var = 0.01 * (1 + 0.81 + 0.6561);
  EXPECT_NEAR(mean, 0.729, 4 * std::sqrt(exact_var / n));
  EXPECT_NEAR(var / exact_var, 1.0, 0.02);
}

TEST(Sgd, UniformNoiseStaysInSupport) {
  const auto f = make_logcosh_instance(1.0, 0.5, 1.0, NoiseKind::uniform);
  for (std::uint32_t r = 0; r < 1000; ++r) {
    const double x = run_sgd(f, 0.0, 0.1, 1, RngKey{4, 0, r}).final_value();
    EXPECT_LE(std::fabs(x), 0.1);
  }
}

TEST(FedAvg, SingleClientEqualsSgd) {
  const auto f = make_piecewise_quadratic(1.0, 0.5, 1.0);
  FedAvgConfig cfg;
  cfg.eta = 0.05;
  cfg.K = 7;
  cfg.R = 9;
  cfg.M = 1;
  cfg.x0 = {0.2};
  const RngKey key{5, 3, 12};
  const auto fed = run_fedavg(homogeneous_clients(f, 1), cfg, key);
  const auto sgd = run_sgd(f, 0.2, 0.05, 63, key, 1.0, CheckpointPolicy::full);
  for (int r = 0; r <= cfg.R; ++r)
    EXPECT_EQ(fed.round_starts.checkpoints[r].value, *sgd.at(static_cast<std::int64_t>(r) * cfg.K));
}

TEST(FedAvg, HeteroSingleStepCancels) {
  FedAvgConfig cfg;
  cfg.eta = 0.1;
  cfg.K = 1;
  cfg.R = 1;
  cfg.M = 2;
  const auto out = run_fedavg(make_hetero_pair(1.0, 1.0), cfg, RngKey{});
  EXPECT_EQ(out.round_starts.final_value(), 0.0);
}

TEST(FedAvg, HeteroTwoStepsDriftLeft) {
  FedAvgConfig cfg;
  cfg.eta = 0.1;
  cfg.K = 2;
  cfg.R = 1;
  cfg.M = 2;
  const auto out = run_fedavg(make_hetero_pair(1.0, 1.0), cfg, RngKey{});
  EXPECT_NEAR(out.round_starts.final_value(), -0.0025, 1e-15);
}

TEST(FedAvg, QuadraticRoundMapIsLinear) {
  const auto f = make_quadratic(1.5, 0.0);
  FedAvgConfig cfg;
  cfg.eta = 0.1;
  cfg.K = 5;
  cfg.R = 6;
  cfg.M = 4;
  cfg.x0 = {2.0};
  const auto out = run_fedavg(homogeneous_clients(f, 4), cfg, RngKey{});
  for (int r = 0; r < cfg.R; ++r) {
    double x = out.round_starts.checkpoints[r].value;
    for (int k = 0; k < cfg.K; ++k) x = x - cfg.eta * (1.5 * x);
    EXPECT_EQ(out.round_starts.checkpoints[r + 1].value, x);
    EXPECT_NEAR(out.round_starts.checkpoints[r + 1].value,
                std::pow(1 - 0.15, cfg.K) * out.round_starts.checkpoints[r].value, 1e-15);
  }
}

TEST(FedAvg, PermutationInvariantWithStreamIds) {
  const auto base = homogeneous_clients(make_piecewise_quadratic(1.0, 0.5, 1.0), 5);
  std::vector<ClientObjective> clients = base;
  for (std::uint32_t m = 0; m < clients.size(); ++m) clients[m].stream_id = m;
  auto shuffled = clients;
  std::reverse(shuffled.begin(), shuffled.end());
  std::swap(shuffled[1], shuffled[3]);
  FedAvgConfig cfg;
  cfg.eta = 0.05;
  cfg.K = 4;
  cfg.R = 10;
  cfg.M = 5;
  const auto a = run_fedavg(clients, cfg, RngKey{9});
  const auto b = run_fedavg(shuffled, cfg, RngKey{9});
  for (int r = 0; r <= cfg.R; ++r)
    EXPECT_EQ(a.round_starts.checkpoints[r].value, b.round_starts.checkpoints[r].value);
}

TEST(FedAvg, FullPolicyRecordsLocalIterates) {
  FedAvgConfig cfg;
  cfg.eta = 0.1;
  cfg.K = 3;
  cfg.R = 2;
  cfg.M = 2;
  const auto out = run_fedavg(make_hetero_pair(1.0, 1.0), cfg, RngKey{}, CheckpointPolicy::full);
  ASSERT_EQ(out.local.size(), 2u);
  EXPECT_EQ(out.local[0].checkpoints.size(), 7u);
  // Client 1 from 0: x <- 0.9 x + 0.1.
  EXPECT_NEAR(*out.local[0].at(1), 0.1, 1e-16);
  EXPECT_NEAR(*out.local[0].at(2), 0.19, 1e-16);
  // Client 2 from 0: x <- 0.95 x - 0.1.
  EXPECT_NEAR(*out.local[1].at(2), -0.195, 1e-16);
}

TEST(FedAvg, ValidatesConfig) {
  FedAvgConfig cfg;
  cfg.eta = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidParameter);
  cfg.eta = 0.1;
  cfg.K = 0;
  EXPECT_THROW(cfg.validate(), InvalidParameter);
  cfg.K = 1;
  cfg.M = 2;
  EXPECT_THROW(run_fedavg(make_hetero_pair(1.0, 1.0), FedAvgConfig{0.1, 1, 1, 3}, RngKey{}), InvalidParameter);
}

TEST(FedAvg, DivergenceReportsRoundAndClient) {
  FedAvgConfig cfg;
  cfg.eta = 3.0;
  cfg.K = 10;
  cfg.R = 10;
  cfg.M = 2;
  cfg.x0 = {1.0};
  try {
    run_fedavg(homogeneous_clients(make_quadratic(1.0, 0.0), 2), cfg, RngKey{});
    FAIL();
  } catch (const DivergedError& e) {
    EXPECT_EQ(e.round(), 3);
    EXPECT_EQ(e.client(), 0);
    EXPECT_EQ(e.step(), 10);
  }
}

TEST(FedAvg, CompositeRunsEachCoordinate) {
  const auto inst = make_lowerbound_composite(1.0, 0.25, 1.0, 1.0, 1.0);
  FedAvgConfig cfg;
  cfg.eta = 0.1;
  cfg.K = 2;
  cfg.R = 3;
  cfg.M = 4;
  cfg.x0 = inst.x0;
  const auto out = run_fedavg_composite(inst, cfg, RngKey{1});
  ASSERT_EQ(out.size(), 3u);
  // Noiseless mu x^2 coordinate: (1 - 2 eta mu)^(KR) x0.
  EXPECT_NEAR(out[1].round_starts.final_value(), std::pow(0.95, 6) * 0.5, 1e-15);
}
