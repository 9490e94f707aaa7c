#include "localsgd/scaling.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "localsgd/errors.hpp"

using namespace localsgd;

TEST(PowerLaw, ExactQuadraticLaw) {
  std::vector<PowerLawPoint> pts;
  for (double s : {1.0, 2.0, 4.0, 8.0}) pts.push_back({s, 3 * s * s});
  const auto f = fit_power_law(pts);
  EXPECT_NEAR(f.exponent, 2.0, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(f.exponent_stderr, 0.0, 1e-7);
  EXPECT_NEAR(f.predict(16.0), 768.0, 1e-9);
}

TEST(PowerLaw, ExactThreeHalves) {
  std::vector<PowerLawPoint> pts;
  for (double s : {2.0, 4.0, 8.0}) pts.push_back({s, std::pow(s, 1.5), 1.0 / s});
  EXPECT_NEAR(fit_power_law(pts).exponent, 1.5, 1e-12);
}

TEST(PowerLaw, WeightsPullTowardTrustedPoints) {
  std::vector<PowerLawPoint> pts{{1, 1, 1e6}, {2, 4, 1e6}, {4, 100, 1e-6}};
  EXPECT_NEAR(fit_power_law(pts).exponent, 2.0, 1e-3);
}

TEST(PowerLaw, RejectsBadInput) {
  std::vector<PowerLawPoint> few{{1, 1}, {2, 2}};
  EXPECT_THROW(fit_power_law(few), InvalidParameter);
  std::vector<PowerLawPoint> neg{{1, 1}, {2, -2}, {3, 0}};
  try {
    fit_power_law(neg);
    FAIL();
  } catch (const InvalidParameter& e) {
    EXPECT_NE(std::string(e.what()).find("indices 1,2"), std::string::npos) << e.what();
  }
  std::vector<PowerLawPoint> dup{{1, 1}, {2, 2}, {2, 3}};
  EXPECT_THROW(fit_power_law(dup), InvalidParameter);
}

TEST(Sweep, ExpectedExponents) {
  EXPECT_EQ(expected_exponent(BiasOrder::second, SweepAxis::k), 1.5);
  EXPECT_EQ(expected_exponent(BiasOrder::second, SweepAxis::eta), 2.0);
  EXPECT_EQ(expected_exponent(BiasOrder::third, SweepAxis::k), 2.0);
  EXPECT_EQ(expected_exponent(BiasOrder::third, SweepAxis::eta), 3.0);
  EXPECT_EQ(bias_order_of(make_piecewise_quadratic(1, 0.5, 1)), BiasOrder::second);
  EXPECT_EQ(bias_order_of(make_logcosh_instance(1, 0.5, 1)), BiasOrder::third);
  EXPECT_THROW(bias_order_of(make_quadratic(1, 1)), OutOfRegime);
}

TEST(Sweep, RegimeGateNamesHypothesis) {
  const auto pw = make_piecewise_quadratic(1.0, 0.5, 1.0);
  try {
    check_sweep_regime(pw, {SweepAxis::k, {16, 32, 64, 128}, 0.01, 0.0, 1000});
    FAIL();
  } catch (const OutOfRegime& e) {
    EXPECT_EQ(e.hypothesis().rfind("eta <= 1/(2 H k)", 0), 0u) << e.hypothesis();
  }
  EXPECT_THROW(check_sweep_regime(pw, {SweepAxis::eta, {0.01, 0.02, 0.04}, 20, 0.0, 1000}), OutOfRegime);
  EXPECT_TRUE(check_sweep_regime(pw, {SweepAxis::k, {16, 32, 64, 128}, 0.002, 0.0, 1000}).empty());
  const auto lc = make_logcosh_instance(1.0, 0.5, 1.0);
  EXPECT_EQ(check_sweep_regime(lc, {SweepAxis::k, {16, 32, 64}, 0.002, 0.0, 1000}).size(), 1u);
  EXPECT_THROW(check_sweep_regime(pw, {SweepAxis::k, {1, 2, 3}, 0.01, 0.0, 1000}), OutOfRegime);
}

TEST(Sweep, PiecewiseExponentInK) {
  const auto pw = make_piecewise_quadratic(1.0, 0.5, 1.0);
  const auto r = sweep_bias_scaling(pw, {SweepAxis::k, {16, 32, 64, 128}, 0.002, 0.0, 200000}, RngKey{4, 1});
  EXPECT_GE(r.fit.exponent, 1.35);
  EXPECT_LE(r.fit.exponent, 1.65);
  for (const auto& p : r.points) {
    EXPECT_TRUE(p.used_in_fit);
    EXPECT_LT(p.bias.mean, 0.0);
  }
}

TEST(Sweep, LogCoshExponentInEta) {
  const auto lc = make_logcosh_instance(1.0, 0.5, 1.0);
  const auto r = sweep_bias_scaling(lc, {SweepAxis::eta, {0.002, 0.004, 0.008}, 32, 0.0, 100000}, RngKey{4, 2});
  EXPECT_GE(r.fit.exponent, 2.8);
  EXPECT_LE(r.fit.exponent, 3.2);
}

TEST(Sweep, NoiseOnlyPointsAreFlagged) {
  // Equal curvatures: the bias is zero, so nothing is significant.
  const auto flat = make_piecewise_quadratic(1.0, 1.0, 1.0);
  EXPECT_THROW(sweep_bias_scaling(flat, {SweepAxis::k, {4, 8, 16}, 0.01, 0.0, 20000}, RngKey{4, 3}), Inconclusive);
}

TEST(Sweep, CsvLayout) {
  SweepResult r;
  SweepPoint p;
  p.s = 16;
  p.bias.mean = -0.5;
  p.bias.std_error = 0.25;
  p.used_in_fit = true;
  r.points.push_back(p);
  EXPECT_EQ(sweep_table(r, SweepAxis::k).str(), "axis,s,mean,stderr,used_in_fit\nk,16,-0.5,0.25,true\n");
}
