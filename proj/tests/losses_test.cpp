#include "sgan/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sgan/gradcheck.hpp"
#include "sgan/rng.hpp"
#include "helpers.hpp"

namespace {

using namespace sgan;

TEST(ClassificationLoss, PerfectPredictionIsZero) {
  auto tau = Tensor<double>::from_data({1}, {1.0});
  auto loss = classification_loss(tau, {1});
  EXPECT_NEAR(loss.item(), 0.0, 1e-15);
}

TEST(ClassificationLoss, HalfConfidenceGivesLogTwo) {
  // y(tau - 1/2) + 1/2 = 1/2 for either label at tau = 1/2
  auto tau = Tensor<double>::from_data({2}, {0.5, 0.5});
  auto loss = classification_loss(tau, {1, -1});
  EXPECT_NEAR(loss.item(), std::log(2.0), 1e-12);
}

TEST(ClassificationLoss, HandComputedMixedCase) {
  auto tau = Tensor<double>::from_data({2}, {0.9, 0.2});
  auto loss = classification_loss(tau, {1, -1});
  // present class: 0.9; absent class: -(0.2-0.5)+0.5 = 0.8
  const double expect = -(std::log(0.9) + std::log(0.8)) / 2.0;
  EXPECT_NEAR(loss.item(), expect, 1e-12);
}

TEST(ClassificationLoss, ConfidentMistakeHitsTheFloor) {
  // tau = 1 with label -1 drives the argument to 0, clamped at 1e-12
  auto tau = Tensor<double>::from_data({1}, {1.0});
  auto loss = classification_loss(tau, {-1});
  EXPECT_NEAR(loss.item(), -std::log(1e-12), 1e-6);
}

TEST(ClassificationLoss, MatchesLoopOracleOnRandomInputs) {
  Pcg32 rng(30);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = rng.uniform_int(1, 6);
    std::vector<double> tv(m);
    std::vector<int> y(m);
    for (int i = 0; i < m; ++i) {
      tv[i] = rng.uniform(0.05, 0.95);
      y[i] = rng.bernoulli(0.5) ? 1 : -1;
    }
    auto loss = classification_loss(Tensor<double>::from_data({m}, tv), y);
    double expect = 0;
    for (int i = 0; i < m; ++i)
      expect += -std::log(std::max(y[i] * (tv[i] - 0.5) + 0.5, 1e-12));
    expect /= m;
    EXPECT_NEAR(loss.item(), expect, 1e-12);
  }
}

TEST(ClassificationLoss, GradientMatchesFiniteDifferences) {
  std::vector<double> tv = {0.3, 0.7, 0.55};
  auto r = finite_diff_check<double>(
      [](const Tensor<double>& t) { return classification_loss(t, {1, -1, 1}); }, tv,
      {3}, 1e-6);
  EXPECT_EQ(r.skipped, 0);
  EXPECT_LT(r.max_rel_err, 1e-6);
}

TEST(ClassificationLoss, InputValidation) {
  auto tau = Tensor<double>::from_data({2}, {0.5, 0.5});
  EXPECT_THROW(classification_loss(tau, {1}), std::invalid_argument);
  EXPECT_THROW(classification_loss(tau, {1, 0}), std::invalid_argument);
  auto bad = Tensor<double>::from_data({1}, {1.2});
  EXPECT_THROW(classification_loss(bad, {1}), std::invalid_argument);
}

GrayImage seeds_of(int h, int w, const std::vector<uint8_t>& px) {
  GrayImage g;
  g.width = w;
  g.height = h;
  g.pixels = px;
  return g;
}

TEST(SeedLoss, UniformHalfProbabilityGivesLogTwo) {
  auto phi = Tensor<double>::from_data({2, 2, 2}, std::vector<double>(8, 0.5));
  auto loss = seed_loss(phi, seeds_of(2, 2, {1, 2, 0, 255}));
  // two seeded pixels, each -log(1/2), normalized by the seed count
  EXPECT_NEAR(loss.item(), std::log(2.0), 1e-12);
}

TEST(SeedLoss, MatchesLoopOracleOnRandomInputs) {
  Pcg32 rng(31);
  const int m = 3, h = 4, w = 5;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> pv(m * h * w);
    for (auto& v : pv) v = rng.uniform(0.02, 1.0);
    std::vector<uint8_t> seeds(h * w);
    for (auto& s : seeds) {
      const int r = rng.uniform_int(0, 5);
      s = r <= m ? static_cast<uint8_t>(r) : kUnlabeled;
    }
    auto loss = seed_loss(Tensor<double>::from_data({m, h, w}, pv), seeds_of(h, w, seeds));
    double expect = 0;
    int count = 0;
    for (int i = 0; i < h * w; ++i)
      if (seeds[i] >= 1 && seeds[i] <= m) {
        expect += -std::log(std::max(pv[(seeds[i] - 1) * h * w + i], 1e-12));
        ++count;
      }
    if (count) expect /= count;
    EXPECT_NEAR(loss.item(), expect, 1e-12);
  }
}

TEST(SeedLoss, AllPixelsUnseededGivesZeroAndFlag) {
  auto phi = Tensor<double>::from_data({2, 2, 2}, std::vector<double>(8, 0.3));
  bool all_empty = false;
  auto loss = seed_loss(phi, seeds_of(2, 2, {0, 255, 0, 255}), &all_empty);
  EXPECT_TRUE(all_empty);
  EXPECT_EQ(loss.item(), 0.0);
}

TEST(SeedLoss, GradientMatchesFiniteDifferences) {
  std::vector<double> pv = {0.4, 0.6, 0.9, 0.2, 0.5, 0.25, 0.75, 0.8};
  auto r = finite_diff_check<double>(
      [](const Tensor<double>& t) {
        GrayImage s;
        s.width = 2;
        s.height = 2;
        s.pixels = {1, 2, 255, 1};
        return seed_loss(t, s);
      },
      pv, {2, 2, 2}, 1e-6);
  EXPECT_LT(r.max_rel_err, 1e-6);
}

TEST(SeedLoss, RejectsBadPalette) {
  auto phi = Tensor<double>::from_data({2, 2, 2}, std::vector<double>(8, 0.5));
  EXPECT_THROW(seed_loss(phi, seeds_of(2, 2, {3, 0, 0, 0})), std::invalid_argument);
  EXPECT_THROW(seed_loss(phi, seeds_of(2, 1, {0, 0})), std::invalid_argument);
}

TEST(SganTotal, CombinesWithLambdaExactly) {
  auto a = Tensor<double>::from_data({1}, {0.7});
  auto b = Tensor<double>::from_data({1}, {1.3});
  auto l_cls = sum(a), l_seed = sum(b);
  EXPECT_NEAR(sgan_total(l_cls, l_seed, 0.15).item(), 0.7 + 0.15 * 1.3, 1e-15);
  EXPECT_NEAR(sgan_total(l_cls, l_seed, 0.0).item(), 0.7, 1e-15);
  EXPECT_THROW(sgan_total(l_cls, l_seed, -0.1), std::invalid_argument);
}

TEST(BalancedSeedLoss, SeparateForegroundBackgroundNormalization) {
  // channel 0 is background; seeds: one class-1 pixel, two background, one
  // unlabeled. fg term: -log phi_1 at pixel 0; bg term: mean of -log phi_0
  std::vector<double> pv(3 * 4, 0.5);
  const double e = std::exp(1.0);
  pv[1 * 4 + 0] = 1.0 / (e * e);  // phi_1(pixel 0) -> -log = 2
  pv[0 * 4 + 1] = 1.0 / std::sqrt(e);  // phi_0(pixel 1) -> 0.5
  pv[0 * 4 + 2] = 1.0 / std::sqrt(e);  // phi_0(pixel 2) -> 0.5
  auto phi = Tensor<double>::from_data({3, 2, 2}, pv);
  auto loss = balanced_seed_loss(phi, seeds_of(2, 2, {1, 0, 0, 255}));
  EXPECT_NEAR(loss.item(), 2.0 + 0.5, 1e-12);
}

TEST(BalancedSeedLoss, MatchesLoopOracleOnRandomInputs) {
  Pcg32 rng(32);
  const int m = 2, h = 3, w = 3;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> pv((m + 1) * h * w);
    for (auto& v : pv) v = rng.uniform(0.05, 1.0);
    std::vector<uint8_t> seeds(h * w);
    for (auto& s : seeds) {
      const int r = rng.uniform_int(0, m + 1);
      s = r <= m ? static_cast<uint8_t>(r) : kUnlabeled;
    }
    auto loss =
        balanced_seed_loss(Tensor<double>::from_data({m + 1, h, w}, pv), seeds_of(h, w, seeds));
    double fg = 0, bg = 0;
    int nfg = 0, nbg = 0;
    for (int i = 0; i < h * w; ++i) {
      if (seeds[i] == kUnlabeled) continue;
      if (seeds[i] == 0) {
        bg += -std::log(std::max(pv[i], 1e-12));
        ++nbg;
      } else {
        fg += -std::log(std::max(pv[seeds[i] * h * w + i], 1e-12));
        ++nfg;
      }
    }
    double expect = (nfg ? fg / nfg : 0.0) + (nbg ? bg / nbg : 0.0);
    EXPECT_NEAR(loss.item(), expect, 1e-12);
  }
}

TEST(BalancedSeedLoss, GradientMatchesFiniteDifferences) {
  Pcg32 rng(33);
  std::vector<double> pv(3 * 4);
  for (auto& v : pv) v = rng.uniform(0.1, 0.9);
  auto r = finite_diff_check<double>(
      [](const Tensor<double>& t) {
        GrayImage s;
        s.width = 2;
        s.height = 2;
        s.pixels = {1, 0, 2, 0};
        return balanced_seed_loss(t, s);
      },
      pv, {3, 2, 2}, 1e-6);
  EXPECT_LT(r.max_rel_err, 1e-6);
}

TEST(BoundaryLoss, IdenticalDistributionsGiveZero) {
  std::vector<double> pv = {0.7, 0.2, 0.3, 0.8, 0.3, 0.8, 0.7, 0.2};
  auto phi = Tensor<double>::from_data({2, 2, 2}, pv);
  auto r = Tensor<double>::from_data({2, 2, 2}, pv);
  EXPECT_NEAR(boundary_loss(phi, r).item(), 0.0, 1e-12);
}

TEST(BoundaryLoss, HandComputedKlCase) {
  // one position, two classes: KL(R || Phi) with R = (3/4, 1/4), Phi = (1/2, 1/2)
  auto phi = Tensor<double>::from_data({2, 1, 1}, {0.5, 0.5});
  auto r = Tensor<double>::from_data({2, 1, 1}, {0.75, 0.25});
  const double expect = 0.75 * std::log(0.75 / 0.5) + 0.25 * std::log(0.25 / 0.5);
  EXPECT_NEAR(boundary_loss(phi, r).item(), expect, 1e-12);
}

TEST(BoundaryLoss, ZeroTargetMassContributesNothing) {
  // R = (1, 0): the 0 log 0 term is dropped, leaving log 2
  auto phi = Tensor<double>::from_data({2, 1, 1}, {0.5, 0.5});
  auto r = Tensor<double>::from_data({2, 1, 1}, {1.0, 0.0});
  EXPECT_NEAR(boundary_loss(phi, r).item(), std::log(2.0), 1e-12);
}

TEST(BoundaryLoss, TinyPredictionsAreFloored) {
  auto phi = Tensor<double>::from_data({2, 1, 1}, {1e-20, 1.0});
  auto r = Tensor<double>::from_data({2, 1, 1}, {1.0, 0.0});
  // -log(clamp(1e-20)) = -log(1e-12)
  EXPECT_NEAR(boundary_loss(phi, r).item(), -std::log(1e-12) + 0.0, 1e-9);
}

TEST(BoundaryLoss, AveragesOverPositionsNotChannels) {
  // two positions with the same per-position KL: loss equals that KL
  auto phi = Tensor<double>::from_data({2, 1, 2}, {0.5, 0.5, 0.5, 0.5});
  auto r = Tensor<double>::from_data({2, 1, 2}, {0.75, 0.75, 0.25, 0.25});
  const double kl = 0.75 * std::log(0.75 / 0.5) + 0.25 * std::log(0.25 / 0.5);
  EXPECT_NEAR(boundary_loss(phi, r).item(), kl, 1e-12);
}

TEST(BoundaryLoss, GradientMatchesFiniteDifferences) {
  Pcg32 rng(34);
  std::vector<double> pv(2 * 2 * 2), rv(2 * 2 * 2);
  for (auto& v : pv) v = rng.uniform(0.1, 0.9);
  for (auto& v : rv) v = rng.uniform(0.1, 0.9);
  auto res = finite_diff_check<double>(
      [&](const Tensor<double>& t) {
        return boundary_loss(t, Tensor<double>::from_data({2, 2, 2}, rv));
      },
      pv, {2, 2, 2}, 1e-6);
  EXPECT_EQ(res.skipped, 0);
  EXPECT_LT(res.max_rel_err, 1e-6);
}

TEST(BoundaryLoss, RejectsNegativeTargetsAndShapeMismatch) {
  auto phi = Tensor<double>::from_data({2, 1, 1}, {0.5, 0.5});
  EXPECT_THROW(boundary_loss(phi, Tensor<double>::from_data({2, 1, 1}, {-0.1, 1.1})),
               std::invalid_argument);
  EXPECT_THROW(boundary_loss(phi, Tensor<double>::from_data({1, 1, 2}, {0.5, 0.5})),
               std::invalid_argument);
}

}  // namespace
