#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "trajguide/error.hpp"
#include "trajguide/rng.hpp"
#include "trajguide/tensor.hpp"
#include "unit/helpers.hpp"

using namespace trajguide;

TEST(Tensor, IndexIsCOrder) {
  Tensor t(Shape{2, 3, 4, 5});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  EXPECT_EQ(t.at(1, 2, 3, 4), 119.0);
  EXPECT_EQ(t.at(1, 0, 0, 0), 60.0);
  EXPECT_EQ(t.at(0, 1, 0, 0), 20.0);
  EXPECT_EQ(t.at(0, 0, 1, 0), 5.0);
}

TEST(Tensor, ChannelAndFrameSlices) {
  std::mt19937_64 gen(1);
  const Tensor t = testutil::random_tensor(Shape{3, 4, 2, 2}, gen);
  const Tensor ch = t.channel(2);
  const Tensor fr = t.frame(1);
  EXPECT_EQ(ch.shape(), (Shape{1, 4, 2, 2}));
  EXPECT_EQ(fr.shape(), (Shape{3, 1, 2, 2}));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(ch.at(0, k, 1, 0), t.at(2, k, 1, 0));
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(fr.at(c, 0, 0, 1), t.at(c, 1, 0, 1));

  Tensor u(t.shape());
  for (std::size_t k = 0; k < 4; ++k) u.set_frame(k, t.frame(k));
  EXPECT_TRUE(testutil::bit_equal(u, t));
}

TEST(Tensor, FiniteChecks) {
  Tensor t(Shape{1, 1, 2, 2}, 1.0);
  EXPECT_TRUE(t.all_finite());
  EXPECT_NO_THROW(require_finite(t, "t"));
  t[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(require_finite(t, "t"), Error);
  EXPECT_THROW(require_same_shape(t, Tensor(Shape{1, 1, 2, 3}), "x"), Error);
}

TEST(Tensor, Reductions) {
  const std::vector<double> a{3.0, 4.0};
  const std::vector<double> b{1.0, -2.0};
  EXPECT_DOUBLE_EQ(l2_norm(a), 5.0);
  EXPECT_DOUBLE_EQ(dot(a, b), -5.0);
  EXPECT_DOUBLE_EQ(max_abs_diff(Tensor(Shape{1, 1, 1, 2}, a), Tensor(Shape{1, 1, 1, 2}, b)), 6.0);
}

TEST(ValidityMask, BroadcastsOverChannels) {
  ValidityMask m(Shape{1, 2, 3, 3}, 0);
  m.at(0, 1, 2, 2) = 1;
  EXPECT_TRUE(m.broadcasts_to(Shape{4, 2, 3, 3}));
  EXPECT_FALSE(m.broadcasts_to(Shape{4, 3, 3, 3}));
  EXPECT_TRUE(m.observed(3, 1, 2, 2));
  EXPECT_FALSE(m.observed(3, 0, 2, 2));
  EXPECT_EQ(m.count(), 1u);

  ValidityMask per(Shape{2, 2, 3, 3}, 0);
  EXPECT_FALSE(per.broadcasts_to(Shape{3, 2, 3, 3}));
}

TEST(KeyedRng, SameKeySameDraws) {
  KeyedRng a(42), b(42);
  const Tensor x = a.gaussian(Shape{2, 2, 4, 4}, {NoisePurpose::kInitial, 0, 0});
  const Tensor y = b.gaussian(Shape{2, 2, 4, 4}, {NoisePurpose::kInitial, 0, 0});
  EXPECT_TRUE(testutil::bit_equal(x, y));
  EXPECT_EQ(a.log(), b.log());
}

TEST(KeyedRng, DrawsIndependentOfOrder) {
  KeyedRng a(7), b(7);
  const NoiseKey k1{NoisePurpose::kRenoise, 5, 0};
  const NoiseKey k2{NoisePurpose::kInitial, 0, 0};
  const auto a1 = a.gaussian(16, k1);
  a.gaussian(16, k2);
  b.gaussian(16, k2);
  b.gaussian(100, {NoisePurpose::kTest, 1, 1});
  const auto b1 = b.gaussian(16, k1);
  EXPECT_EQ(a1, b1);
}

TEST(KeyedRng, DistinctKeysDiffer) {
  KeyedRng r(1);
  const auto x = r.gaussian(8, {NoisePurpose::kRenoise, 3, 0});
  const auto y = r.gaussian(8, {NoisePurpose::kRenoise, 3, 1});
  const auto z = r.gaussian(8, {NoisePurpose::kRenoise, 4, 0});
  EXPECT_NE(x, y);
  EXPECT_NE(x, z);
  KeyedRng other(2);
  EXPECT_NE(x, other.gaussian(8, {NoisePurpose::kRenoise, 3, 0}));
}

TEST(KeyedRng, PrefixStable) {
  KeyedRng r(3);
  const auto shortv = r.gaussian(10, {NoisePurpose::kTest, 0, 0});
  const auto longv = r.gaussian(1000, {NoisePurpose::kTest, 0, 0});
  for (std::size_t i = 0; i < shortv.size(); ++i) EXPECT_EQ(shortv[i], longv[i]);
}

TEST(KeyedRng, LogRecordsEveryDraw) {
  KeyedRng r(9);
  r.gaussian(4, {NoisePurpose::kInitial, 0, 0});
  r.uniform(3, {NoisePurpose::kScene, 1, 2});
  ASSERT_EQ(r.log().size(), 2u);
  EXPECT_EQ(r.log()[0].count, 4u);
  EXPECT_EQ(r.log()[1].key, (NoiseKey{NoisePurpose::kScene, 1, 2}));
  EXPECT_EQ(r.log()[1].count, 3u);
}

TEST(KeyedRng, GaussianMoments) {
  KeyedRng r(11);
  const std::size_t n = 200000;
  const auto v = r.gaussian(n, {NoisePurpose::kTest, 0, 0});
  double m = 0.0, m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    m += x;
    m2 += x * x;
    m4 += x * x * x * x;
  }
  m /= n;
  m2 /= n;
  m4 /= n;
  // Standard errors: 1/sqrt(n), sqrt(2/n), sqrt(96/n).
  EXPECT_NEAR(m, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(KeyedRng, UniformOpenInterval) {
  KeyedRng r(5);
  const auto u = r.uniform(100000, {NoisePurpose::kTest, 0, 0});
  double mean = 0.0;
  for (double x : u) {
    ASSERT_GT(x, 0.0);
    ASSERT_LT(x, 1.0);
    mean += x;
  }
  EXPECT_NEAR(mean / u.size(), 0.5, 4.0 * std::sqrt(1.0 / 12.0 / u.size()));
}
