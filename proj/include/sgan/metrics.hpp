#pragma once
// Evaluation: confusion matrix, per-class IoU and mIoU for segmentation;
// pooled precision/recall/F_beta for seed quality. Percentages throughout.
//
// Precision and recall pool pixel counts over the whole evaluation set, and
// F_beta is applied to the pooled values (per-image or per-class averaging
// schemes would give different numbers; the pooled scheme is the documented
// one here).

#include <json.hpp>

#include <cstdint>
#include <vector>

#include "sgan/data.hpp"
#include "sgan/tensor.hpp"

namespace sgan {

constexpr double kFBetaSquared = 0.4;

// Weighted harmonic mean of precision and recall (both in percent).
inline double f_beta(double precision, double recall, double beta2 = kFBetaSquared) {
  require(beta2 >= 0, "f_beta: beta2 must be >= 0");
  const double denom = beta2 * precision + recall;
  if (denom <= 0) return 0.0;
  return (1.0 + beta2) * precision * recall / denom;
}

struct SegReport {
  int num_classes = 0;                 // foreground classes; matrix spans M+1
  std::vector<int64_t> confusion;      // (M+1)^2, row = gt class, col = predicted
  std::vector<double> per_class_iou;   // percent; -1 marks an excluded (absent) class
  double miou = 0.0;                   // percent, mean over non-excluded classes

  int64_t at(int gt, int pred) const {
    return confusion[static_cast<size_t>(gt) * (num_classes + 1) + pred];
  }
};

struct SeedReport {
  double precision = 0.0, recall = 0.0, f = 0.0;  // percent
  bool no_foreground_seeds = false;
  int64_t correct = 0, seed_foreground = 0, gt_foreground = 0;
};

namespace detail {

inline void check_eval_pair(const GrayImage& pred, const GrayImage& gt, int m,
                            bool allow_unlabeled_pred, size_t index) {
  const std::string where = "evaluate: image " + std::to_string(index);
  require(pred.width == gt.width && pred.height == gt.height,
          where + ": prediction " + std::to_string(pred.width) + "x" +
              std::to_string(pred.height) + " vs ground truth " +
              std::to_string(gt.width) + "x" + std::to_string(gt.height));
  for (uint8_t v : gt.pixels)
    require(v <= m, where + ": ground-truth value " + std::to_string(v) +
                        " outside 0.." + std::to_string(m));
  for (uint8_t v : pred.pixels) {
    if (allow_unlabeled_pred && v == kUnlabeled) continue;
    require(v <= m, where + ": predicted value " + std::to_string(v) +
                        (allow_unlabeled_pred ? " outside palette" : " outside 0.." +
                        std::to_string(m)));
  }
}

}  // namespace detail

// Dense labelings over 0..M (no unlabeled pixels on either side).
inline SegReport evaluate_segmentation(const std::vector<GrayImage>& preds,
                                       const std::vector<GrayImage>& gts,
                                       int num_classes) {
  require(num_classes >= 1, "evaluate_segmentation: need at least one class");
  require(preds.size() == gts.size() && !preds.empty(),
          "evaluate_segmentation: got " + std::to_string(preds.size()) +
              " predictions for " + std::to_string(gts.size()) + " ground truths");
  SegReport rep;
  rep.num_classes = num_classes;
  const int k = num_classes + 1;
  rep.confusion.assign(static_cast<size_t>(k) * k, 0);
  for (size_t i = 0; i < preds.size(); ++i) {
    detail::check_eval_pair(preds[i], gts[i], num_classes, /*allow_unlabeled=*/false, i);
    for (size_t p = 0; p < gts[i].pixels.size(); ++p)
      ++rep.confusion[static_cast<size_t>(gts[i].pixels[p]) * k + preds[i].pixels[p]];
  }
  rep.per_class_iou.assign(k, -1.0);
  double acc = 0;
  int included = 0;
  for (int c = 0; c < k; ++c) {
    int64_t tp = rep.at(c, c), fp = 0, fn = 0;
    for (int o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += rep.at(o, c);
      fn += rep.at(c, o);
    }
    if (tp + fp + fn == 0) continue;  // class absent everywhere: excluded
    rep.per_class_iou[c] = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    acc += rep.per_class_iou[c];
    ++included;
  }
  require(included > 0, "evaluate_segmentation: no class occurs anywhere");
  rep.miou = acc / included;
  return rep;
}

// Seed masks may carry unlabeled pixels; only foreground seed pixels enter
// precision, and recall is against all ground-truth foreground.
inline SeedReport evaluate_seeds(const std::vector<GrayImage>& seeds,
                                 const std::vector<GrayImage>& gts, int num_classes) {
  require(num_classes >= 1, "evaluate_seeds: need at least one class");
  require(seeds.size() == gts.size() && !seeds.empty(),
          "evaluate_seeds: got " + std::to_string(seeds.size()) + " seed masks for " +
              std::to_string(gts.size()) + " ground truths");
  SeedReport rep;
  for (size_t i = 0; i < seeds.size(); ++i) {
    detail::check_eval_pair(seeds[i], gts[i], num_classes, /*allow_unlabeled=*/true, i);
    for (size_t p = 0; p < gts[i].pixels.size(); ++p) {
      const uint8_t s = seeds[i].pixels[p], g = gts[i].pixels[p];
      if (g >= 1 && g <= num_classes) ++rep.gt_foreground;
      if (s >= 1 && s <= num_classes) {
        ++rep.seed_foreground;
        if (s == g) ++rep.correct;
      }
    }
  }
  rep.no_foreground_seeds = rep.seed_foreground == 0;
  rep.precision = rep.seed_foreground > 0
                      ? 100.0 * static_cast<double>(rep.correct) / rep.seed_foreground
                      : 0.0;
  rep.recall = rep.gt_foreground > 0
                   ? 100.0 * static_cast<double>(rep.correct) / rep.gt_foreground
                   : 0.0;
  rep.f = f_beta(rep.precision, rep.recall);
  return rep;
}

inline nlohmann::ordered_json to_json(const SegReport& r) {
  nlohmann::ordered_json j;
  j["miou"] = r.miou;
  j["per_class_iou"] = r.per_class_iou;
  j["confusion"] = r.confusion;
  return j;
}

inline nlohmann::ordered_json to_json(const SeedReport& r) {
  nlohmann::ordered_json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f_beta"] = r.f;
  j["no_foreground_seeds"] = r.no_foreground_seeds;
  j["correct"] = r.correct;
  j["seed_foreground"] = r.seed_foreground;
  j["gt_foreground"] = r.gt_foreground;
  return j;
}

}  // namespace sgan
