#include "localsgd/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace localsgd;

// Known-answer vectors for Philox4x32-10 from the Random123 distribution.
TEST(Philox, KnownAnswerZero) {
  const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                              {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto out = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                              {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(RngKey, SameKeySameDraw) {
  RngKey k{42, 7, 3, 1, 2, 9};
  EXPECT_EQ(random_bits(k), random_bits(k));
  EXPECT_EQ(standard_normal(k), standard_normal(k));
}

TEST(RngKey, EveryFieldChangesTheDraw) {
  const RngKey base{42, 7, 3, 1, 2, 9};
  std::set<std::uint64_t> seen{random_bits(base)};
  seen.insert(random_bits(base.with_experiment(8)));
  seen.insert(random_bits(base.with_replica(4)));
  seen.insert(random_bits(base.with_client(2)));
  seen.insert(random_bits(base.with_round(3)));
  seen.insert(random_bits(base.with_step(10)));
  RngKey other = base;
  other.master_seed = 43;
  seen.insert(random_bits(other));
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Uniform, StrictlyInsideUnitInterval) {
  const KeyedStream s(RngKey{1, 2});
  for (std::uint32_t i = 0; i < 100000; ++i) {
    const double u = s.uniform(i, 0, 0, 0);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(InverseNormal, RoundTripsThroughErfc) {
  for (double p : {1e-300, 1e-20, 1e-8, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.92, 0.999, 1 - 1e-12}) {
    const double z = inverse_normal_cdf(p);
    const double back = 0.5 * std::erfc(-z / std::sqrt(2.0));
    EXPECT_NEAR(back / p, 1.0, 1e-13) << "p=" << p;
  }
  EXPECT_EQ(inverse_normal_cdf(0.5), 0.0);
}

TEST(InverseNormal, OddSymmetry) {
  for (double p : {0x1p-30, 0.0078125, 0.125, 0.4375}) EXPECT_DOUBLE_EQ(inverse_normal_cdf(p), -inverse_normal_cdf(1 - p));
}

TEST(Normal, MomentsOfKeyedStream) {
  const KeyedStream s(RngKey{2024, 11});
  const int n = 400000;
  double m1 = 0, m2 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal(static_cast<std::uint32_t>(i), 0, 0, 0);
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(Normal, NeighbouringStepsUncorrelated) {
  const KeyedStream s(RngKey{5, 0});
  const int n = 200000;
  double acc = 0;
  for (int i = 0; i < n; ++i)
    acc += s.normal(static_cast<std::uint32_t>(i), 0, 0, 0) * s.normal(static_cast<std::uint32_t>(i), 0, 0, 1);
  EXPECT_NEAR(acc / n, 0.0, 4.0 / std::sqrt(n));
}
