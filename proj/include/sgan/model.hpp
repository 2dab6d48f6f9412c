#pragma once
// Composed networks and the ablation-variant wiring.
//
// Stage 0/1 model: backbone -> optional attention -> classifier head, plus an
// optional M-channel seed segmentation branch. Stage 3 model: backbone ->
// (M+1)-channel head -> softmax.

#include <string>
#include <vector>

#include "sgan/attention.hpp"
#include "sgan/backbone.hpp"
#include "sgan/checkpoint.hpp"
#include "sgan/ops.hpp"
#include "sgan/tensor.hpp"

namespace sgan {

enum class Variant { kBaseline, kSalSeed, kSeed, kCls, kSeg, kFull };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kSalSeed: return "SGAN-SAL-SEED";
    case Variant::kSeed: return "SGAN-SEED";
    case Variant::kCls: return "SGAN_CLS";
    case Variant::kSeg: return "SGAN_SEG";
    case Variant::kFull: return "SGAN";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::kBaseline, Variant::kSalSeed, Variant::kSeed,
                    Variant::kCls, Variant::kSeg, Variant::kFull})
    if (s == variant_name(v)) return v;
  fail("unknown variant '" + s +
       "' (expected baseline, SGAN-SAL-SEED, SGAN-SEED, SGAN_CLS, SGAN_SEG or SGAN)");
}

// Attention/branch wiring per variant. The three full variants differ only in
// which branch sources the final seeds, not in the trained model.
struct VariantWiring {
  bool use_attention = false;
  bool all_salient = false;  // mask forced to all-ones
  bool seg_branch = false;   // M-channel seed branch trained with the seed loss
  double lambda = 0.0;
};

inline VariantWiring wiring_for(Variant v, double lambda_full) {
  switch (v) {
    case Variant::kBaseline: return {false, false, false, 0.0};
    case Variant::kSalSeed: return {true, true, false, 0.0};
    case Variant::kSeed: return {true, false, false, 0.0};
    case Variant::kCls:
    case Variant::kSeg:
    case Variant::kFull: return {true, false, true, lambda_full};
  }
  return {};
}

struct ModelConfig {
  BackboneConfig backbone;
  int num_classes = 5;
  bool use_attention = false;
  bool all_salient = false;
  bool seg_branch = false;
  double t_b = 0.5;
};

// Classification model with the optional attention module and seed branch.
template <typename T = float>
class SganModel {
 public:
  struct Outputs {
    Tensor<T> features;   // backbone output X
    Tensor<T> enhanced;   // E; equals X when attention is disabled
    Tensor<T> scores;     // sigmoid class probabilities [M]
    Tensor<T> cams;       // raw class activation maps [M,h,w]
    Tensor<T> seg_probs;  // softmax over M channels, defined iff seg_branch
  };

  SganModel() = default;
  SganModel(const ModelConfig& cfg, uint64_t seed)
      : cfg_(cfg),
        backbone_(cfg.backbone, seed),
        classifier_(cfg.backbone.out_channels(), cfg.num_classes, seed) {
    require(cfg.num_classes >= 1, "model: need at least one class");
    if (cfg.use_attention)
      attention_ = AttentionParams<T>(cfg.backbone.out_channels(), seed);
    if (cfg.seg_branch)
      seg_head_ = SegHead<T>(cfg.backbone.out_channels(), cfg.num_classes, seed, "seedbranch");
  }

  // saliency_feat: [0,1] values at feature resolution, row-major, length
  // h*w of the feature map; ignored unless the attention mask needs it.
  Outputs forward(const Tensor<T>& image, const std::vector<double>& saliency_feat) const {
    Outputs o;
    o.features = backbone_.forward(image);
    if (cfg_.use_attention) {
      std::vector<double> sal =
          cfg_.all_salient
              ? std::vector<double>(static_cast<size_t>(o.features.dim(1)) * o.features.dim(2), 1.0)
              : saliency_feat;
      o.enhanced = sgan_forward(o.features, sal, cfg_.t_b, attention_);
    } else {
      o.enhanced = o.features;
    }
    o.scores = classifier_.scores(o.enhanced);
    o.cams = classifier_.cams(o.enhanced);
    if (cfg_.seg_branch) o.seg_probs = softmax(seg_head_.forward(o.enhanced), 0);
    return o;
  }

  // Context attention map D for visualization/tests: [N,N].
  Tensor<T> attention_map(const Tensor<T>& image, const std::vector<double>& saliency_feat) const {
    require(cfg_.use_attention, "model: variant has no attention module");
    auto feat = backbone_.forward(image);
    const int n = feat.dim(1) * feat.dim(2);
    std::vector<double> sal = cfg_.all_salient ? std::vector<double>(n, 1.0) : saliency_feat;
    auto b = binarize(sal, cfg_.t_b);
    return context_attention(spatial_attention(feat, attention_), b);
  }

  const ModelConfig& config() const { return cfg_; }
  const AttentionParams<T>& attention() const { return attention_; }

  NamedTensors<T> parameters() const {
    NamedTensors<T> out;
    backbone_.collect(out);
    classifier_.collect(out);
    if (cfg_.use_attention) attention_.collect(out);
    if (cfg_.seg_branch) seg_head_.collect(out);
    return out;
  }

 private:
  ModelConfig cfg_;
  Backbone<T> backbone_;
  ClassifierHead<T> classifier_;
  AttentionParams<T> attention_;
  SegHead<T> seg_head_;
};

// Stage-3 segmentation network: backbone plus an (M+1)-channel 1x1 head.
template <typename T = float>
class SegNet {
 public:
  SegNet() = default;
  SegNet(const BackboneConfig& bb, int num_classes, uint64_t seed)
      : backbone_(bb, seed),
        head_(bb.out_channels(), num_classes + 1, seed, "seghead") {}

  // [3,H,W] -> per-position distribution over M+1 classes at feature res.
  Tensor<T> probs(const Tensor<T>& image) const {
    return softmax(head_.forward(backbone_.forward(image)), 0);
  }

  NamedTensors<T> parameters() const {
    NamedTensors<T> out;
    backbone_.collect(out);
    head_.collect(out);
    return out;
  }

 private:
  Backbone<T> backbone_;
  SegHead<T> head_;
};

}  // namespace sgan
