#include "sgan/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "sgan/rng.hpp"

namespace {

using namespace sgan;

GrayImage gray(int h, int w, std::vector<uint8_t> px) {
  GrayImage g;
  g.height = h;
  g.width = w;
  g.pixels = std::move(px);
  return g;
}

TEST(FBeta, MatchesTheWeightedHarmonicMeanFormula) {
  // (1 + b2) P R / (b2 P + R) with b2 = 0.4
  EXPECT_NEAR(f_beta(80.0, 40.0), 1.4 * 80.0 * 40.0 / (0.4 * 80.0 + 40.0), 1e-12);
  EXPECT_NEAR(f_beta(80.0, 40.0), 62.2222222222, 1e-6);
  EXPECT_NEAR(f_beta(30.0, 90.0, 1.0), 2 * 30.0 * 90.0 / (30.0 + 90.0), 1e-12);
}

TEST(FBeta, EqualPrecisionAndRecallCollapseToThatValue) {
  for (double v : {5.0, 33.3, 100.0})
    EXPECT_NEAR(f_beta(v, v), v, 1e-9);
}

TEST(FBeta, ZeroDenominatorGivesZeroAndNegativeBetaThrows) {
  EXPECT_DOUBLE_EQ(f_beta(0.0, 0.0), 0.0);
  EXPECT_THROW(f_beta(50.0, 50.0, -0.1), std::invalid_argument);
}

TEST(FBeta, WeightsRecallLessThanPrecisionWhenBetaSquaredBelowOne) {
  // with b2 < 1 the score tracks precision more closely
  EXPECT_GT(f_beta(90.0, 30.0), f_beta(30.0, 90.0));
}

TEST(EvaluateSegmentation, PerfectPredictionScoresHundred) {
  auto gt = gray(2, 2, {0, 1, 2, 0});
  auto rep = evaluate_segmentation({gt}, {gt}, 2);
  EXPECT_DOUBLE_EQ(rep.miou, 100.0);
  for (int c = 0; c <= 2; ++c) EXPECT_DOUBLE_EQ(rep.per_class_iou[c], 100.0);
}

TEST(EvaluateSegmentation, HandComputedConfusionAndIou) {
  // gt:   0 0 1 1    pred: 0 1 1 2
  auto gt = gray(1, 4, {0, 0, 1, 1});
  auto pred = gray(1, 4, {0, 1, 1, 2});
  auto rep = evaluate_segmentation({pred}, {gt}, 2);
  EXPECT_EQ(rep.at(0, 0), 1);
  EXPECT_EQ(rep.at(0, 1), 1);
  EXPECT_EQ(rep.at(1, 1), 1);
  EXPECT_EQ(rep.at(1, 2), 1);
  // class 0: tp=1 fp=0 fn=1 -> 50; class 1: tp=1 fp=1 fn=1 -> 33.3; class 2:
  // tp=0 fp=1 fn=0 -> 0 (present in pred only, still included)
  EXPECT_NEAR(rep.per_class_iou[0], 50.0, 1e-9);
  EXPECT_NEAR(rep.per_class_iou[1], 100.0 / 3.0, 1e-9);
  EXPECT_NEAR(rep.per_class_iou[2], 0.0, 1e-9);
  EXPECT_NEAR(rep.miou, (50.0 + 100.0 / 3.0 + 0.0) / 3.0, 1e-9);
}

TEST(EvaluateSegmentation, MatchesACountingOracleOnRandomImages) {
  const int m = 3, h = 8, w = 8;
  Pcg32 rng(21);
  std::vector<GrayImage> preds, gts;
  for (int i = 0; i < 5; ++i) {
    std::vector<uint8_t> p(h * w), g(h * w);
    for (auto& v : p) v = static_cast<uint8_t>(rng.uniform_int(0, m));
    for (auto& v : g) v = static_cast<uint8_t>(rng.uniform_int(0, m));
    preds.push_back(gray(h, w, p));
    gts.push_back(gray(h, w, g));
  }
  auto rep = evaluate_segmentation(preds, gts, m);

  std::vector<int64_t> counts(static_cast<size_t>(m + 1) * (m + 1), 0);
  for (size_t i = 0; i < preds.size(); ++i)
    for (size_t p = 0; p < preds[i].pixels.size(); ++p)
      ++counts[static_cast<size_t>(gts[i].pixels[p]) * (m + 1) + preds[i].pixels[p]];
  EXPECT_EQ(rep.confusion, counts);
  double acc = 0;
  int included = 0;
  for (int c = 0; c <= m; ++c) {
    int64_t tp = counts[static_cast<size_t>(c) * (m + 1) + c], fp = 0, fn = 0;
    for (int o = 0; o <= m; ++o)
      if (o != c) {
        fp += counts[static_cast<size_t>(o) * (m + 1) + c];
        fn += counts[static_cast<size_t>(c) * (m + 1) + o];
      }
    if (tp + fp + fn == 0) continue;
    const double iou = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    EXPECT_NEAR(rep.per_class_iou[c], iou, 1e-9);
    acc += iou;
    ++included;
  }
  ASSERT_GT(included, 0);
  EXPECT_NEAR(rep.miou, acc / included, 1e-9);
}

TEST(EvaluateSegmentation, AbsentClassesAreExcludedFromTheMean) {
  // class 2 never occurs in gt or pred -> marked -1, mean over the rest
  auto gt = gray(1, 2, {0, 1});
  auto pred = gray(1, 2, {0, 0});
  auto rep = evaluate_segmentation({pred}, {gt}, 2);
  EXPECT_DOUBLE_EQ(rep.per_class_iou[2], -1.0);
  EXPECT_NEAR(rep.per_class_iou[0], 50.0, 1e-9);  // tp=1 fp=1 fn=0
  EXPECT_NEAR(rep.per_class_iou[1], 0.0, 1e-9);
  EXPECT_NEAR(rep.miou, 25.0, 1e-9);
}

TEST(EvaluateSegmentation, IsInvariantToImageOrder) {
  Pcg32 rng(22);
  std::vector<GrayImage> preds, gts;
  for (int i = 0; i < 4; ++i) {
    std::vector<uint8_t> p(16), g(16);
    for (auto& v : p) v = static_cast<uint8_t>(rng.uniform_int(0, 2));
    for (auto& v : g) v = static_cast<uint8_t>(rng.uniform_int(0, 2));
    preds.push_back(gray(4, 4, p));
    gts.push_back(gray(4, 4, g));
  }
  auto a = evaluate_segmentation(preds, gts, 2);
  std::reverse(preds.begin(), preds.end());
  std::reverse(gts.begin(), gts.end());
  auto b = evaluate_segmentation(preds, gts, 2);
  EXPECT_EQ(a.confusion, b.confusion);
  EXPECT_DOUBLE_EQ(a.miou, b.miou);
}

TEST(EvaluateSegmentation, RejectsUnlabeledAndMalformedInputs) {
  auto gt = gray(1, 2, {0, 1});
  EXPECT_THROW(evaluate_segmentation({gray(1, 2, {0, kUnlabeled})}, {gt}, 2),
               std::invalid_argument);
  EXPECT_THROW(evaluate_segmentation({gray(1, 2, {0, 1})}, {gray(1, 2, {0, kUnlabeled})}, 2),
               std::invalid_argument);
  EXPECT_THROW(evaluate_segmentation({gray(1, 2, {0, 3})}, {gt}, 2), std::invalid_argument);
  EXPECT_THROW(evaluate_segmentation({gray(2, 1, {0, 1})}, {gt}, 2), std::invalid_argument);
  EXPECT_THROW(evaluate_segmentation({}, {}, 2), std::invalid_argument);
  // all-background everywhere still counts class 0; but an empty palette hit
  // is impossible, so the only "no class occurs" case is zero-sized images
  EXPECT_THROW(evaluate_segmentation({gray(0, 0, {})}, {gray(0, 0, {})}, 2),
               std::invalid_argument);
}

TEST(EvaluateSeeds, PoolsCountsAcrossImages) {
  // image 1: gt fg {1,1,0}, seeds {1,255,0} -> correct 1, seed fg 1, gt fg 2
  // image 2: gt fg {2,0},   seeds {2,1}     -> correct 1, seed fg 2, gt fg 1
  auto rep = evaluate_seeds({gray(1, 3, {1, kUnlabeled, 0}), gray(1, 2, {2, 1})},
                            {gray(1, 3, {1, 1, 0}), gray(1, 2, {2, 0})}, 2);
  EXPECT_EQ(rep.correct, 2);
  EXPECT_EQ(rep.seed_foreground, 3);
  EXPECT_EQ(rep.gt_foreground, 3);
  EXPECT_NEAR(rep.precision, 200.0 / 3.0, 1e-9);
  EXPECT_NEAR(rep.recall, 200.0 / 3.0, 1e-9);
  EXPECT_NEAR(rep.f, 200.0 / 3.0, 1e-9);
  EXPECT_FALSE(rep.no_foreground_seeds);
}

TEST(EvaluateSeeds, WrongClassSeedsCostPrecisionButNotRecall) {
  // seed says class 2 where gt is class 1: counted in seed_foreground only
  auto rep = evaluate_seeds({gray(1, 2, {2, 1})}, {gray(1, 2, {1, 1})}, 2);
  EXPECT_EQ(rep.correct, 1);
  EXPECT_EQ(rep.seed_foreground, 2);
  EXPECT_EQ(rep.gt_foreground, 2);
  EXPECT_NEAR(rep.precision, 50.0, 1e-9);
  EXPECT_NEAR(rep.recall, 50.0, 1e-9);
}

TEST(EvaluateSeeds, BackgroundSeedsDoNotEnterTheCounts) {
  // background seed over gt foreground is a recall miss, not a precision hit
  auto rep = evaluate_seeds({gray(1, 3, {0, 0, 1})}, {gray(1, 3, {1, 0, 1})}, 1);
  EXPECT_EQ(rep.correct, 1);
  EXPECT_EQ(rep.seed_foreground, 1);
  EXPECT_EQ(rep.gt_foreground, 2);
  EXPECT_NEAR(rep.precision, 100.0, 1e-9);
  EXPECT_NEAR(rep.recall, 50.0, 1e-9);
}

TEST(EvaluateSeeds, NoForegroundSeedsSetsTheFlagAndZeroScores) {
  auto rep = evaluate_seeds({gray(1, 2, {0, kUnlabeled})}, {gray(1, 2, {1, 0})}, 1);
  EXPECT_TRUE(rep.no_foreground_seeds);
  EXPECT_DOUBLE_EQ(rep.precision, 0.0);
  EXPECT_DOUBLE_EQ(rep.recall, 0.0);
  EXPECT_DOUBLE_EQ(rep.f, 0.0);
}

TEST(EvaluateSeeds, RejectsUnlabeledGroundTruthButAcceptsUnlabeledSeeds) {
  EXPECT_NO_THROW(evaluate_seeds({gray(1, 1, {kUnlabeled})}, {gray(1, 1, {0})}, 1));
  EXPECT_THROW(evaluate_seeds({gray(1, 1, {0})}, {gray(1, 1, {kUnlabeled})}, 1),
               std::invalid_argument);
  EXPECT_THROW(evaluate_seeds({gray(1, 1, {5})}, {gray(1, 1, {0})}, 1),
               std::invalid_argument);
}

TEST(Reports, SerializeTheDocumentedKeys) {
  auto gt = gray(1, 2, {0, 1});
  auto seg = to_json(evaluate_segmentation({gt}, {gt}, 1));
  EXPECT_TRUE(seg.contains("miou"));
  EXPECT_TRUE(seg.contains("per_class_iou"));
  EXPECT_TRUE(seg.contains("confusion"));
  auto seed = to_json(evaluate_seeds({gt}, {gt}, 1));
  for (const char* key : {"precision", "recall", "f_beta", "no_foreground_seeds",
                          "correct", "seed_foreground", "gt_foreground"})
    EXPECT_TRUE(seed.contains(key)) << key;
}

}  // namespace
