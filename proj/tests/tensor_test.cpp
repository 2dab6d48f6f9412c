// Tensor handle, autograd bookkeeping and RNG plumbing.

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "helpers.hpp"
#include "sgan/ops.hpp"
#include "sgan/rng.hpp"
#include "sgan/tensor.hpp"

using namespace sgan;

TEST(Rng, DeterministicStreams) {
  Pcg32 a(42, 7), b(42, 7), c(42, 8);
  bool diverged = false;
  for (int i = 0; i < 64; ++i) {
    uint32_t va = a.next_u32();
    EXPECT_EQ(va, b.next_u32());
    if (va != c.next_u32()) diverged = true;
  }
  EXPECT_TRUE(diverged) << "distinct streams should not collide";
}

TEST(Rng, UniformRangeAndMoments) {
  Pcg32 rng(1, 0);
  double sum = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(Rng, UniformIntInclusiveBounds) {
  Pcg32 rng(3, 1);
  bool saw_lo = false, saw_hi = false;
  for (int i = 0; i < 2000; ++i) {
    int v = rng.uniform_int(2, 5);
    ASSERT_GE(v, 2);
    ASSERT_LE(v, 5);
    saw_lo = saw_lo || v == 2;
    saw_hi = saw_hi || v == 5;
  }
  EXPECT_TRUE(saw_lo);
  EXPECT_TRUE(saw_hi);
}

TEST(Rng, NormalMoments) {
  Pcg32 rng(9, 2);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double v = rng.normal();
    ASSERT_TRUE(std::isfinite(v));
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.03);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Tensor, Construction) {
  auto z = Tensor<float>::zeros({2, 3});
  EXPECT_EQ(z.numel(), 6);
  for (float v : z.data()) EXPECT_EQ(v, 0.0f);

  auto f = Tensor<double>::full({4}, 2.5);
  for (double v : f.data()) EXPECT_EQ(v, 2.5);

  auto s = Tensor<float>::scalar(3.0f);
  EXPECT_EQ(s.item(), 3.0f);

  EXPECT_THROW(Tensor<float>::from_data({2, 2}, {1.0f}), std::invalid_argument);
  EXPECT_THROW(z.item(), std::invalid_argument);
}

TEST(Tensor, LeafFlagsAndZeroGrad) {
  auto x = Tensor<double>::full({3}, 1.0, true);
  EXPECT_TRUE(x.is_leaf());
  EXPECT_TRUE(x.requires_grad());
  auto y = sum(x);
  EXPECT_FALSE(y.is_leaf());
  backward(y);
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
  x.zero_grad();
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Tensor, BackwardRequiresScalar) {
  auto x = Tensor<double>::full({2, 2}, 1.0, true);
  auto y = add(x, x);
  try {
    backward(y);
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("must be scalar"), std::string::npos);
  }
}

TEST(Tensor, BackwardTwiceThrows) {
  auto x = Tensor<double>::full({2}, 1.0, true);
  auto y = sum(x);
  backward(y);
  EXPECT_THROW(backward(y), std::runtime_error);
}

TEST(Tensor, BackwardWithoutGradThrows) {
  auto x = Tensor<double>::full({2}, 1.0, false);
  auto y = sum(x);
  EXPECT_THROW(backward(y), std::invalid_argument);
}

TEST(Tensor, GradAccumulatesAcrossUses) {
  // y = sum(x + x) + sum(x * x) -> dy/dx = 2 + 2x
  auto x = Tensor<double>::from_data({3}, {1.0, 2.0, 3.0}, true);
  auto y = add(sum(add(x, x)), sum(mul(x, x)));
  backward(y);
  const auto& g = x.grad();
  EXPECT_DOUBLE_EQ(g[0], 4.0);
  EXPECT_DOUBLE_EQ(g[1], 6.0);
  EXPECT_DOUBLE_EQ(g[2], 8.0);
}

TEST(Tensor, DiamondGraphGradient) {
  // y = sum(a * a) with a = x + x -> dy/dx = 8x
  auto x = Tensor<double>::from_data({2}, {1.0, -2.0}, true);
  auto a = add(x, x);
  auto y = sum(mul(a, a));
  backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 8.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -16.0);
}

TEST(Tensor, NoGradSuppressesTape) {
  auto x = Tensor<double>::full({2}, 1.0, true);
  {
    NoGrad ng;
    auto y = sum(x);
    EXPECT_FALSE(y.requires_grad());
  }
  auto y2 = sum(x);
  EXPECT_TRUE(y2.requires_grad());
}

TEST(Tensor, GradOnNonTrackedThrows) {
  auto x = Tensor<float>::zeros({2});
  EXPECT_THROW(x.grad(), std::invalid_argument);
}
