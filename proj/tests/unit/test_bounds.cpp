#include "localsgd/bounds.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "localsgd/errors.hpp"

using namespace localsgd;

namespace {

RateInputs ones() {
  RateInputs in;
  in.H = in.sigma = in.Q = in.G = in.D = in.B = 1.0;
  return in;
}

}  // namespace

TEST(LowerHomog, Example) {
  auto in = ones();
  in.K = 4;
  in.R = 4;
  const auto r = lower_bound_homog(in);
  EXPECT_DOUBLE_EQ(r.term("HD^2/(KR)"), 0.0625);
  EXPECT_DOUBLE_EQ(r.term("sigma D/sqrt(MKR)"), 0.25);
  EXPECT_NEAR(r.term("noise_bias"), 0.25, 1e-15);
  EXPECT_EQ(r.total, r.terms[0].value + r.terms[1].value + r.terms[2].value);
}

TEST(LowerHomog, NoNoiseAndLargeK) {
  auto in = ones();
  in.sigma = 0.0;
  in.K = 4;
  in.R = 4;
  const auto r = lower_bound_homog(in);
  EXPECT_EQ(r.total, r.term("HD^2/(KR)"));
  // K^(-1/3) while K < sigma^2 R / (H^2 D^2); beyond that the sqrt(KR) branch
  // takes over and the decay is K^(-1/2).
  auto big = ones();
  big.R = 1000000;
  const auto at = [&](int K) {
    big.K = K;
    return lower_bound_homog(big).term("noise_bias");
  };
  EXPECT_NEAR(at(1000) / at(8000), 2.0, 1e-12);
  big.R = 1;
  EXPECT_NEAR(at(1000) / at(8000), std::sqrt(8.0), 1e-12);
  in.K = 1;
  EXPECT_THROW(lower_bound_homog(in), OutOfRegime);
}

TEST(LowerHetero, Examples) {
  auto in = ones();
  in.K = 2;
  in.R = 8;
  in.zeta_star = 1.0;
  EXPECT_NEAR(lower_bound_hetero(in).term("hetero_bias"), 0.25, 1e-15);
  in.R = 1;
  in.zeta_star = 10.0;
  EXPECT_NEAR(lower_bound_hetero(in).term("hetero_bias"), 4.641588833612779, 1e-12);
}

TEST(LowerHetero, ReducesToHomogeneous) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int i = 0; i < 500; ++i) {
    RateInputs in;
    in.H = u(gen), in.sigma = u(gen), in.D = u(gen);
    in.M = 1 + static_cast<int>(gen() % 16), in.K = 2 + static_cast<int>(gen() % 64),
    in.R = 1 + static_cast<int>(gen() % 256);
    EXPECT_EQ(lower_bound_hetero(in).total, lower_bound_homog(in).total);
  }
}

TEST(UpperUniform, ZetaTerm) {
  auto in = ones();
  in.zeta = 8.0;
  in.R = 8;
  EXPECT_NEAR(upper_bound_uniform(in).term("H^(1/3) zeta^(2/3) D^(4/3)/R^(2/3)"), 1.0, 1e-12);
  in.zeta = 0.0;
  in.zeta_star = 5.0;
  EXPECT_EQ(upper_bound_uniform(in).term("H^(1/3) zeta^(2/3) D^(4/3)/R^(2/3)"), 0.0);
}

TEST(Convex3o, Examples) {
  EXPECT_DOUBLE_EQ(stepsize_and_rate_convex_3o(ones()).eta, 1.0);
  auto in = ones();
  in.H = 4;
  EXPECT_DOUBLE_EQ(stepsize_and_rate_convex_3o(in).eta, 0.25);
  auto r = ones();
  r.M = 4, r.K = 16, r.R = 64, r.Q = 0.5;
  const auto sr = stepsize_and_rate_convex_3o(r);
  EXPECT_NEAR(sr.rate.term("HB/(KR)"), 9.765625e-4, 1e-15);
  EXPECT_NEAR(sr.rate.term("sigma sqrt(BH)/sqrt(MKR)"), 0.015625, 1e-15);
  EXPECT_NEAR(sr.rate.term("B^(4/5) sigma^(4/5) Q^(2/5)/(K^(2/5) R^(4/5))"), 8.975e-3, 1e-6);
}

TEST(Convex3o, NoNoiseNoCurvature) {
  auto in = ones();
  in.sigma = 0.0;
  in.Q = 0.0;
  in.H = 2.0;
  const auto sr = stepsize_and_rate_convex_3o(in);
  EXPECT_EQ(sr.eta, 0.5);
  EXPECT_EQ(sr.rate.total, sr.rate.term("HB/(KR)"));
}

TEST(Nonconvex3o, Examples) {
  EXPECT_NEAR(stepsize_and_rate_nonconvex_3o(ones()).eta, std::pow(2.0, -0.8), 1e-15);
  EXPECT_NEAR(stepsize_and_rate_nonconvex_3o(ones()).eta, 0.5743, 1e-4);
  auto in = ones();
  in.R = 32;
  EXPECT_NEAR(stepsize_and_rate_nonconvex_3o(in).rate.term("B^(4/5) (G+sigma)^(4/5) Q^(2/5)/R^(4/5)"), 0.10882, 1e-5);
  in.G = in.sigma = 0.0;
  const auto sr = stepsize_and_rate_nonconvex_3o(in);
  EXPECT_EQ(sr.rate.total, sr.rate.term("HB/(KR)"));
}

TEST(Nonconvex2o, Examples) {
  const auto sr = stepsize_and_rate_nonconvex_2o(ones());
  EXPECT_NEAR(sr.eta_candidates[2].value, std::pow(2.0, -2.0 / 3.0), 1e-15);
  EXPECT_NEAR(sr.eta_candidates[2].value, 0.63, 0.005);
  auto in = ones();
  in.R = 1024;
  const double t2 = stepsize_and_rate_nonconvex_2o(in).rate.terms[2].value;
  in.G = 0.0;  // (G+sigma) = 1 so the comparison isolates the R dependence
  const double t3 = stepsize_and_rate_nonconvex_3o(in).rate.terms[2].value;
  const double r2 = stepsize_and_rate_nonconvex_2o(in).rate.terms[2].value;
  EXPECT_NEAR(t3, 3.91e-3, 1e-5);
  EXPECT_NEAR(r2, std::pow(2.0, -20.0 / 3.0), 1e-15);
  EXPECT_LT(t3, r2);
  in.R = 8 * 1024;
  EXPECT_NEAR(r2 / stepsize_and_rate_nonconvex_2o(in).rate.terms[2].value, 4.0, 1e-12);
  EXPECT_GT(t2, r2);
}

TEST(Bounds, TermsMonotoneAndEtaCapped) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int i = 0; i < 300; ++i) {
    RateInputs in;
    in.H = u(gen), in.sigma = u(gen), in.Q = u(gen), in.G = u(gen), in.D = u(gen), in.B = u(gen),
    in.zeta_star = u(gen), in.zeta = u(gen);
    in.M = 1 + static_cast<int>(gen() % 8), in.K = 2 + static_cast<int>(gen() % 32),
    in.R = 1 + static_cast<int>(gen() % 64);
    auto check = [&](auto eval) {
      const auto base = eval(in);
      for (int which = 0; which < 3; ++which) {
        RateInputs up = in;
        (which == 0 ? up.R : which == 1 ? up.K : up.M) *= 2;
        const auto bigger = eval(up);
        for (std::size_t t = 0; t < base.terms.size(); ++t)
          EXPECT_LE(bigger.terms[t].value, base.terms[t].value * (1 + 1e-12)) << base.theorem << " " << base.terms[t].name;
      }
    };
    check(lower_bound_homog);
    check(lower_bound_hetero);
    check(upper_bound_uniform);
    for (auto t : {UpperTheorem::convex3o, UpperTheorem::nonconvex3o, UpperTheorem::nonconvex2o}) {
      check([&](const RateInputs& x) { return stepsize_and_rate(t, x).rate; });
      EXPECT_LE(stepsize_and_rate(t, in).eta, 1.0 / in.H);
    }
  }
}

TEST(Bounds, RejectsBadInputs) {
  auto in = ones();
  in.sigma = -1;
  EXPECT_THROW(stepsize_and_rate_convex_3o(in), InvalidParameter);
  in = ones();
  in.R = 0;
  EXPECT_THROW(upper_bound_uniform(in), InvalidParameter);
}

TEST(Bounds, CsvRows) {
  auto t = bound_table();
  auto in = ones();
  in.K = 4;
  in.R = 4;
  add_bound_rows(t, lower_bound_homog(in));
  const auto s = t.str();
  EXPECT_EQ(s.rfind("theorem,term_name,value\nlower_homog,HD^2/(KR),0.0625\n", 0), 0u) << s;
  EXPECT_NE(s.find("lower_homog,total,0.5625\n"), std::string::npos);
}

namespace {

RateInputs logcosh_inputs(const Objective1D& f, double x0) {
  RateInputs in;
  in.H = 1.0, in.Q = 0.5, in.sigma = 1.0;
  in.B = f.value(x0) - f.value(0.0);
  in.G = std::fabs(f.mean_grad(x0));
  in.D = std::fabs(x0);
  in.M = 8, in.K = 16, in.R = 64;
  return in;
}

}  // namespace

TEST(VerifyUpper, LogCoshPassesWithSlackAndFailsNegativeControl) {
  const auto f = make_logcosh_instance(1.0, 0.5, 1.0);
  const auto in = logcosh_inputs(f, 1.0);
  const auto clients = homogeneous_clients(f, 8);
  for (auto t : {UpperTheorem::convex3o, UpperTheorem::nonconvex3o}) {
    const auto v = verify_upper_bound(clients, in, 1.0, 256, RngKey{21}, t);
    EXPECT_TRUE(v.pass) << v.verdict_line();
    EXPECT_EQ(v.verdict_line().rfind("PASS theorem=" + std::string(to_string(t)), 0), 0u);
    const auto neg = verify_upper_bound(clients, in, 1.0, 256, RngKey{21}, t, 0.001);
    EXPECT_FALSE(neg.pass) << neg.verdict_line();
  }
}

TEST(VerifyUpper, NoiselessQuadraticAtOptimum) {
  const auto q = make_quadratic(1.0, 0.0);
  RateInputs in;
  in.H = 1.0, in.M = 2, in.K = 4, in.R = 4;
  const auto v = verify_upper_bound(homogeneous_clients(q, 2), in, 0.0, 4, RngKey{}, UpperTheorem::convex3o);
  EXPECT_EQ(v.measured.mean, 0.0);
  EXPECT_TRUE(v.pass);
}

TEST(VerifyUpper, RefusesMismatchedAssumptions) {
  const auto pw = make_piecewise_quadratic(1.0, 0.5, 1.0);
  auto in = ones();
  in.M = 2;
  EXPECT_THROW(verify_upper_bound(homogeneous_clients(pw, 2), in, 1.0, 4, RngKey{}, UpperTheorem::convex3o),
               OutOfRegime);
  EXPECT_NO_THROW(verify_upper_bound(homogeneous_clients(pw, 2), in, 1.0, 4, RngKey{}, UpperTheorem::nonconvex2o));
  in.H = 0.5;
  EXPECT_THROW(verify_upper_bound(homogeneous_clients(pw, 2), in, 1.0, 4, RngKey{}, UpperTheorem::nonconvex2o),
               OutOfRegime);
}
