#include <gtest/gtest.h>

#include <cmath>

#include "ndt/rng.hpp"

using ndt::rng_stream;

TEST(RandomStream, SameSeedAndLabelReproduce) {
  auto a = rng_stream(42, "mobility");
  auto b = rng_stream(42, "mobility");
  EXPECT_EQ(a, b);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(RandomStream, SeedSensitivity) {
  auto a = rng_stream(42, "swipe");
  auto b = rng_stream(43, "swipe");
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a() == b();
  EXPECT_EQ(same, 0);
}

// Two labels under one seed behave as independent uniform sources: the
// first draws differ and the sample correlation over 1e4 draws is within
// 4 standard errors of zero.
TEST(RandomStream, DistinctLabelsAreIndependent) {
  auto a = rng_stream(42, "mobility");
  auto b = rng_stream(42, "swipe");
  EXPECT_NE(a(), b());
  const int n = 10000;
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform(), y = b.uniform();
    sa += x; sb += y; sab += x * y; saa += x * x; sbb += y * y;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  EXPECT_LT(std::abs(corr), 4.0 / std::sqrt(n));
}

TEST(RandomStream, ConsumptionOrderAcrossStreamsIsIrrelevant) {
  auto m1 = rng_stream(7, "mobility"), s1 = rng_stream(7, "swipe");
  std::vector<std::uint64_t> m_first, s_first;
  for (int i = 0; i < 50; ++i) m_first.push_back(m1());
  for (int i = 0; i < 50; ++i) s_first.push_back(s1());

  auto m2 = rng_stream(7, "mobility"), s2 = rng_stream(7, "swipe");
  std::vector<std::uint64_t> m_inter, s_inter;
  for (int i = 0; i < 50; ++i) {
    s_inter.push_back(s2());
    m_inter.push_back(m2());
  }
  EXPECT_EQ(m_first, m_inter);
  EXPECT_EQ(s_first, s_inter);
}

TEST(RandomStream, UniformAndNormalMoments) {
  auto r = rng_stream(1, "moments");
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(RandomStream, CopyReplaysFuture) {
  auto r = rng_stream(5, "x");
  r();
  auto copy = r;
  EXPECT_EQ(r(), copy());
  EXPECT_NE(r.split("a")(), r.split("b")());
}
