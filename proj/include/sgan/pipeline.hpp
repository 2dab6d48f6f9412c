#pragma once
// Stage orchestration: configuration, the three training stages, seed
// generation between stages, evaluation and visualization.
//
// Stage 0 (train_baseline): classifier only, no attention.
// Stage 1 (train_sgan): per-variant attention wiring, initialized from the
//   baseline checkpoint, optionally with the seed branch and seed loss.
// Stage 2 (make_*_seeds): initial seeds from baseline activation maps at
//   feature resolution; final seeds from the two-branch ensemble plus
//   saliency background at image resolution.
// Stage 3 (train_seg): backbone + (M+1)-channel head with balanced seed loss
//   plus the CRF boundary loss.
//
// Determinism: every random decision draws from a PCG stream derived from the
// run seed (parameter init via name-hashed streams, batch composition and
// flips via per-step streams), so one seed reproduces byte-identical logs,
// checkpoints and metrics.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sgan/attention.hpp"
#include "sgan/backbone.hpp"
#include "sgan/checkpoint.hpp"
#include "sgan/crf.hpp"
#include "sgan/data.hpp"
#include "sgan/losses.hpp"
#include "sgan/metrics.hpp"
#include "sgan/model.hpp"
#include "sgan/netpbm.hpp"
#include "sgan/optim.hpp"
#include "sgan/rng.hpp"
#include "sgan/seeds.hpp"
#include "sgan/synth.hpp"
#include "sgan/tensor.hpp"

namespace sgan {

struct PipelineConfig {
  DatasetConfig dataset;

  // model
  BackboneConfig backbone;
  double lambda = 0.15;  // seed-loss weight in the stage-1 total
  double t_b = 0.5;      // saliency binarization threshold

  // seed thresholds
  double initial_threshold = 0.3;
  double alpha = 0.2;
  double beta = 0.06;

  // crf
  CrfParams crf;
  int crf_refresh = 25;  // steps between recomputations of a sample's target

  // optimizer
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_decay = 0.3;
  int batch_size = 8;

  // per-stage iteration counts
  int baseline_iterations = 2000;
  int sgan_iterations = 2000;
  int seg_iterations = 2000;
  int log_interval = 50;

  // run
  Variant variant = Variant::kFull;
  double semi_fraction = 0.0;
  uint64_t rng_seed = 1;

  void validate() const {
    dataset.validate();
    require(lambda >= 0, "config: lambda must be >= 0");
    for (double t : {t_b, initial_threshold, alpha, beta})
      require(t >= 0 && t <= 1, "config: thresholds must lie in [0,1]");
    crf.validate();
    require(crf_refresh >= 1, "config: crf_refresh must be >= 1");
    require(lr > 0 && lr_decay > 0, "config: learning rates must be > 0");
    require(momentum >= 0 && momentum < 1, "config: momentum must be in [0,1)");
    require(weight_decay >= 0, "config: weight_decay must be >= 0");
    require(batch_size >= 1, "config: batch_size must be >= 1");
    require(baseline_iterations >= 1 && sgan_iterations >= 1 && seg_iterations >= 1,
            "config: iteration counts must be >= 1");
    require(log_interval >= 1, "config: log_interval must be >= 1");
    require(semi_fraction >= 0 && semi_fraction <= 1,
            "config: semi_fraction must lie in [0,1]");
  }
};

// ---------------------------------------------------------------------------
// config JSON (strict: unknown keys are errors)
// ---------------------------------------------------------------------------

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                       const std::string& where) {
  require(j.is_object(), "config: '" + where + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      fail("config: unknown key '" + where + "." + k + "'");
  }
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  detail::check_keys(j, {"dataset", "model", "thresholds", "crf", "optimizer",
                         "train", "run"},
                     "<root>");
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::check_keys(d, {"image_size", "num_classes", "shapes_min", "shapes_max",
                           "co_occurrence_bias", "corruption", "rng_seed",
                           "train_count", "val_count"},
                       "dataset");
    detail::get_if(d, "image_size", c.dataset.image_size);
    detail::get_if(d, "num_classes", c.dataset.num_classes);
    detail::get_if(d, "shapes_min", c.dataset.shapes_min);
    detail::get_if(d, "shapes_max", c.dataset.shapes_max);
    detail::get_if(d, "co_occurrence_bias", c.dataset.co_occurrence_bias);
    detail::get_if(d, "rng_seed", c.dataset.rng_seed);
    detail::get_if(d, "train_count", c.dataset.train_count);
    detail::get_if(d, "val_count", c.dataset.val_count);
    if (d.contains("corruption")) {
      const auto& cc = d.at("corruption");
      detail::check_keys(cc, {"dilate_px", "erode_px", "hole_prob"}, "dataset.corruption");
      detail::get_if(cc, "dilate_px", c.dataset.corruption.dilate_px);
      detail::get_if(cc, "erode_px", c.dataset.corruption.erode_px);
      detail::get_if(cc, "hole_prob", c.dataset.corruption.hole_prob);
    }
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::check_keys(m, {"channels", "pool_after", "t_b", "lambda"}, "model");
    detail::get_if(m, "channels", c.backbone.channels);
    detail::get_if(m, "pool_after", c.backbone.pool_after);
    detail::get_if(m, "t_b", c.t_b);
    detail::get_if(m, "lambda", c.lambda);
  }
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    detail::check_keys(t, {"initial", "alpha", "beta"}, "thresholds");
    detail::get_if(t, "initial", c.initial_threshold);
    detail::get_if(t, "alpha", c.alpha);
    detail::get_if(t, "beta", c.beta);
  }
  if (j.contains("crf")) {
    const auto& f = j.at("crf");
    detail::check_keys(f, {"w_spatial", "w_bilateral", "theta_gamma", "theta_alpha",
                           "theta_beta", "iterations", "max_positions", "refresh"},
                       "crf");
    detail::get_if(f, "w_spatial", c.crf.w_spatial);
    detail::get_if(f, "w_bilateral", c.crf.w_bilateral);
    detail::get_if(f, "theta_gamma", c.crf.theta_gamma);
    detail::get_if(f, "theta_alpha", c.crf.theta_alpha);
    detail::get_if(f, "theta_beta", c.crf.theta_beta);
    detail::get_if(f, "iterations", c.crf.iterations);
    detail::get_if(f, "max_positions", c.crf.max_positions);
    detail::get_if(f, "refresh", c.crf_refresh);
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    detail::check_keys(o, {"lr", "momentum", "weight_decay", "lr_decay", "batch_size"},
                       "optimizer");
    detail::get_if(o, "lr", c.lr);
    detail::get_if(o, "momentum", c.momentum);
    detail::get_if(o, "weight_decay", c.weight_decay);
    detail::get_if(o, "lr_decay", c.lr_decay);
    detail::get_if(o, "batch_size", c.batch_size);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::check_keys(t, {"baseline_iterations", "sgan_iterations", "seg_iterations",
                           "log_interval"},
                       "train");
    detail::get_if(t, "baseline_iterations", c.baseline_iterations);
    detail::get_if(t, "sgan_iterations", c.sgan_iterations);
    detail::get_if(t, "seg_iterations", c.seg_iterations);
    detail::get_if(t, "log_interval", c.log_interval);
  }
  if (j.contains("run")) {
    const auto& r = j.at("run");
    detail::check_keys(r, {"variant", "semi_fraction", "rng_seed"}, "run");
    if (r.contains("variant")) c.variant = parse_variant(r.at("variant").get<std::string>());
    detail::get_if(r, "semi_fraction", c.semi_fraction);
    detail::get_if(r, "rng_seed", c.rng_seed);
  }
  c.validate();
  return c;
}

inline nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["dataset"] = {{"image_size", c.dataset.image_size},
                  {"num_classes", c.dataset.num_classes},
                  {"shapes_min", c.dataset.shapes_min},
                  {"shapes_max", c.dataset.shapes_max},
                  {"co_occurrence_bias", c.dataset.co_occurrence_bias},
                  {"corruption",
                   {{"dilate_px", c.dataset.corruption.dilate_px},
                    {"erode_px", c.dataset.corruption.erode_px},
                    {"hole_prob", c.dataset.corruption.hole_prob}}},
                  {"rng_seed", c.dataset.rng_seed},
                  {"train_count", c.dataset.train_count},
                  {"val_count", c.dataset.val_count}};
  j["model"] = {{"channels", c.backbone.channels},
                {"pool_after", c.backbone.pool_after},
                {"t_b", c.t_b},
                {"lambda", c.lambda}};
  j["thresholds"] = {{"initial", c.initial_threshold}, {"alpha", c.alpha}, {"beta", c.beta}};
  j["crf"] = {{"w_spatial", c.crf.w_spatial},
              {"w_bilateral", c.crf.w_bilateral},
              {"theta_gamma", c.crf.theta_gamma},
              {"theta_alpha", c.crf.theta_alpha},
              {"theta_beta", c.crf.theta_beta},
              {"iterations", c.crf.iterations},
              {"max_positions", c.crf.max_positions},
              {"refresh", c.crf_refresh}};
  j["optimizer"] = {{"lr", c.lr},
                    {"momentum", c.momentum},
                    {"weight_decay", c.weight_decay},
                    {"lr_decay", c.lr_decay},
                    {"batch_size", c.batch_size}};
  j["train"] = {{"baseline_iterations", c.baseline_iterations},
                {"sgan_iterations", c.sgan_iterations},
                {"seg_iterations", c.seg_iterations},
                {"log_interval", c.log_interval}};
  j["run"] = {{"variant", variant_name(c.variant)},
              {"semi_fraction", c.semi_fraction},
              {"rng_seed", c.rng_seed}};
  return j;
}

// ---------------------------------------------------------------------------
// shared training plumbing
// ---------------------------------------------------------------------------

// Marks the first round(fraction * train size) training samples, in manifest
// order, as fully supervised. The rule is part of the run contract: the same
// dataset with a different fraction differs only in these flags.
inline void apply_semi_fraction(Dataset& ds, double fraction) {
  require(fraction >= 0 && fraction <= 1, "semi_fraction outside [0,1]");
  const int k = static_cast<int>(std::lround(fraction * ds.train.size()));
  for (size_t i = 0; i < ds.train.size(); ++i)
    ds.train[i].full_supervision = static_cast<int>(i) < k;
}

using LogFn = std::function<void(const nlohmann::ordered_json&)>;

namespace detail {

constexpr uint64_t kBatchStreamBase = 0x5bd1e995ull << 20;

// Per-step batch composition and flip decisions.
struct BatchPlan {
  std::vector<int> indices;
  std::vector<bool> flips;
};

inline BatchPlan plan_batch(uint64_t run_seed, int step, int batch, int n_train) {
  Pcg32 rng(run_seed, kBatchStreamBase + static_cast<uint64_t>(step));
  BatchPlan p;
  for (int b = 0; b < batch; ++b) {
    p.indices.push_back(rng.uniform_int(0, n_train - 1));
    p.flips.push_back(rng.bernoulli(0.5));
  }
  return p;
}

// Saliency at feature resolution as [0,1] values; the strongly annotated
// samples substitute their ground-truth foreground.
inline std::vector<double> saliency_feat(const Sample& s, int stride, bool flip) {
  GrayImage sal = s.saliency;
  if (s.full_supervision) sal = semi_substitute(s).first;
  if (flip) sal = flip_horizontal(sal);
  GrayImage ds = downsample_nearest(sal, stride);
  std::vector<double> v(ds.pixels.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = ds.pixels[i] / 255.0;
  return v;
}

inline std::vector<int> pm_labels(const Sample& s, int num_classes) {
  std::vector<int> y(num_classes, -1);
  for (int c : s.labels) y[c - 1] = 1;
  return y;
}

[[noreturn]] inline void divergence(const char* stage, int step) {
  throw std::runtime_error(std::string(stage) + ": loss diverged (NaN) at step " +
                           std::to_string(step));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// stage 0/1: classifier training (shared loop; the baseline is the variant
// with every addition disabled)
// ---------------------------------------------------------------------------

// initial_seeds: per-train-sample masks at feature resolution, required when
// the variant trains the seed branch (ignored otherwise, may be empty).
// init_state: parameters to start from (the baseline checkpoint for stage 1);
// empty = fresh initialization.
template <typename T = float>
SganModel<T> train_classifier_stage(const PipelineConfig& cfg, const Dataset& ds,
                                    const VariantWiring& wiring,
                                    const NamedTensors<T>* init_state,
                                    const std::vector<GrayImage>* initial_seeds,
                                    int iterations, const LogFn& log) {
  require(!ds.train.empty(), "train: empty training split");
  ModelConfig mc;
  mc.backbone = cfg.backbone;
  mc.num_classes = ds.num_classes;
  mc.use_attention = wiring.use_attention;
  mc.all_salient = wiring.all_salient;
  mc.seg_branch = wiring.seg_branch;
  mc.t_b = cfg.t_b;
  SganModel<T> model(mc, cfg.rng_seed);
  if (init_state) {
    auto params = model.parameters();
    // the baseline state covers backbone+classifier; attention and seed
    // branch keep their fresh initialization
    for (auto& [name, t] : params.items) {
      const Tensor<T>* src = init_state->find(name);
      if (!src) continue;
      require(src->shape() == t.shape(),
              "train: shape mismatch for '" + name + "' in the initial state");
      t.node()->value = src->data();
    }
  }
  if (wiring.seg_branch && wiring.lambda > 0)
    require(initial_seeds && initial_seeds->size() == ds.train.size(),
            "train: the seed branch needs one initial seed mask per training sample");

  const int stride = cfg.backbone.stride();
  SgdOptimizer<T> opt(model.parameters(), cfg.lr, cfg.momentum, cfg.weight_decay);
  double acc_cls = 0, acc_seed = 0, acc_total = 0;
  int acc_n = 0;
  for (int step = 0; step < iterations; ++step) {
    opt.set_lr(scheduled_lr(cfg.lr, cfg.lr_decay, step, iterations));
    auto plan = detail::plan_batch(cfg.rng_seed, step, cfg.batch_size,
                                   static_cast<int>(ds.train.size()));
    opt.zero_grad();
    double step_cls = 0, step_seed = 0, step_total = 0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Sample& s = ds.train[plan.indices[b]];
      const bool flip = plan.flips[b];
      auto img = to_input_tensor<T>(flip ? flip_horizontal(s.image) : s.image);
      auto sal = detail::saliency_feat(s, stride, flip);
      auto out = model.forward(img, sal);
      auto l_cls = classification_loss(out.scores, detail::pm_labels(s, ds.num_classes));
      Tensor<T> total = l_cls;
      double seed_val = 0;
      if (wiring.seg_branch && wiring.lambda > 0) {
        GrayImage seeds = s.full_supervision
                              ? downsample_nearest(semi_substitute(s).second, stride)
                              : (*initial_seeds)[plan.indices[b]];
        if (flip) seeds = flip_horizontal(seeds);
        auto l_seed = seed_loss(out.seg_probs, seeds);
        seed_val = static_cast<double>(l_seed.item());
        total = sgan_total(l_cls, l_seed, wiring.lambda);
      }
      step_cls += static_cast<double>(l_cls.item());
      step_seed += seed_val;
      step_total += static_cast<double>(total.item());
      backward(scale(total, 1.0 / cfg.batch_size));
    }
    if (!std::isfinite(step_total)) detail::divergence("train", step);
    opt.step();
    acc_cls += step_cls / cfg.batch_size;
    acc_seed += step_seed / cfg.batch_size;
    acc_total += step_total / cfg.batch_size;
    ++acc_n;
    if ((step + 1) % cfg.log_interval == 0 || step + 1 == iterations) {
      if (log)
        log({{"step", step + 1},
             {"lr", opt.lr()},
             {"L_cls", acc_cls / acc_n},
             {"L_seed", acc_seed / acc_n},
             {"L_total", acc_total / acc_n}});
      acc_cls = acc_seed = acc_total = 0;
      acc_n = 0;
    }
  }
  return model;
}

template <typename T = float>
SganModel<T> train_baseline(const PipelineConfig& cfg, const Dataset& ds,
                            const LogFn& log = nullptr) {
  return train_classifier_stage<T>(cfg, ds, wiring_for(Variant::kBaseline, cfg.lambda),
                                   nullptr, nullptr, cfg.baseline_iterations, log);
}

template <typename T = float>
SganModel<T> train_sgan(const PipelineConfig& cfg, const Dataset& ds,
                        const NamedTensors<T>& baseline_state,
                        const std::vector<GrayImage>* initial_seeds,
                        const LogFn& log = nullptr) {
  return train_classifier_stage<T>(cfg, ds, wiring_for(cfg.variant, cfg.lambda),
                                   &baseline_state, initial_seeds,
                                   cfg.sgan_iterations, log);
}

// ---------------------------------------------------------------------------
// seed generation
// ---------------------------------------------------------------------------

enum class SeedSource { kCls, kSeg, kEnsemble };

inline SeedSource parse_seed_source(const std::string& s) {
  if (s == "cls") return SeedSource::kCls;
  if (s == "seg") return SeedSource::kSeg;
  if (s == "ensemble") return SeedSource::kEnsemble;
  fail("unknown seed source '" + s + "' (expected cls, seg or ensemble)");
}

// Default source per variant: the branch the variant is named for, the
// ensemble for the full model, cls where no seed branch exists.
inline SeedSource default_seed_source(Variant v) {
  switch (v) {
    case Variant::kCls: return SeedSource::kCls;
    case Variant::kSeg: return SeedSource::kSeg;
    case Variant::kFull: return SeedSource::kEnsemble;
    default: return SeedSource::kCls;
  }
}

// Initial seeds at feature resolution, one mask per training sample.
// Strongly annotated samples substitute their (downsampled) ground truth.
template <typename T = float>
std::vector<GrayImage> make_initial_seeds(const PipelineConfig& cfg,
                                          const SganModel<T>& model, const Dataset& ds) {
  NoGrad ng;
  const int stride = cfg.backbone.stride();
  std::vector<GrayImage> out;
  out.reserve(ds.train.size());
  for (const Sample& s : ds.train) {
    if (s.full_supervision) {
      out.push_back(downsample_nearest(semi_substitute(s).second, stride));
      continue;
    }
    auto o = model.forward(to_input_tensor<T>(s.image),
                           detail::saliency_feat(s, stride, false));
    out.push_back(initial_seeds(normalize_cams(o.cams, s.labels), cfg.initial_threshold));
  }
  return out;
}

// Final seeds at image resolution. Strongly annotated samples substitute the
// full ground truth.
template <typename T = float>
std::vector<GrayImage> make_final_seeds(const PipelineConfig& cfg,
                                        const SganModel<T>& model, const Dataset& ds,
                                        SeedSource source) {
  NoGrad ng;
  const int stride = cfg.backbone.stride();
  if (source != SeedSource::kCls)
    require(model.config().seg_branch,
            "make_final_seeds: the model has no seed branch to source from");
  std::vector<GrayImage> out;
  out.reserve(ds.train.size());
  for (const Sample& s : ds.train) {
    if (s.full_supervision) {
      out.push_back(semi_substitute(s).second);
      continue;
    }
    auto o = model.forward(to_input_tensor<T>(s.image),
                           detail::saliency_feat(s, stride, false));
    CamStack cams;
    if (source == SeedSource::kCls) {
      cams = normalize_cams(o.cams, s.labels);
    } else if (source == SeedSource::kSeg) {
      cams = normalize_cams(o.seg_probs, s.labels);
    } else {
      cams = ensemble_cams(normalize_cams(o.cams, s.labels),
                           normalize_cams(o.seg_probs, s.labels));
    }
    // The all-salient ablation removes saliency from the whole pipeline, so
    // its seed synthesis sees an all-ones map too: activation thresholding
    // alone, with no background seeds and no background veto.
    GrayImage sal = s.saliency;
    if (model.config().all_salient)
      std::fill(sal.pixels.begin(), sal.pixels.end(), uint8_t{255});
    out.push_back(final_seeds(upsample_cams(cams, stride), sal, cfg.alpha, cfg.beta));
  }
  return out;
}

// ---------------------------------------------------------------------------
// stage 3: segmentation training
// ---------------------------------------------------------------------------

template <typename T = float>
SegNet<T> train_seg(const PipelineConfig& cfg, const Dataset& ds,
                    const std::vector<GrayImage>& final_seed_masks,
                    const LogFn& log = nullptr) {
  require(!ds.train.empty(), "train_seg: empty training split");
  require(final_seed_masks.size() == ds.train.size(),
          "train_seg: need one seed mask per training sample, got " +
              std::to_string(final_seed_masks.size()) + " for " +
              std::to_string(ds.train.size()));
  const int stride = cfg.backbone.stride();
  SegNet<T> model(cfg.backbone, ds.num_classes, cfg.rng_seed);
  SgdOptimizer<T> opt(model.parameters(), cfg.lr, cfg.momentum, cfg.weight_decay);

  // CRF targets, cached per (sample, flip) and refreshed on a step interval
  struct CachedTarget {
    int step = -1;
    std::vector<T> r;
  };
  std::map<std::pair<int, int>, CachedTarget> crf_cache;

  // feature-resolution CRF: image area-downsampled, spatial stddevs rescaled
  CrfParams crf = cfg.crf;
  crf.theta_gamma = std::max(0.5, cfg.crf.theta_gamma / stride);
  crf.theta_alpha = std::max(0.5, cfg.crf.theta_alpha / stride);

  double acc_seed = 0, acc_bnd = 0;
  int acc_n = 0;
  for (int step = 0; step < cfg.seg_iterations; ++step) {
    opt.set_lr(scheduled_lr(cfg.lr, cfg.lr_decay, step, cfg.seg_iterations));
    auto plan = detail::plan_batch(cfg.rng_seed, step, cfg.batch_size,
                                   static_cast<int>(ds.train.size()));
    opt.zero_grad();
    double step_seed = 0, step_bnd = 0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int idx = plan.indices[b];
      const Sample& s = ds.train[idx];
      const bool flip = plan.flips[b];
      const RgbImage img_px = flip ? flip_horizontal(s.image) : s.image;
      auto img = to_input_tensor<T>(img_px);
      GrayImage seeds = flip ? flip_horizontal(final_seed_masks[idx]) : final_seed_masks[idx];
      GrayImage seeds_feat = downsample_nearest(seeds, stride);

      auto phi = model.probs(img);
      auto l_seed = balanced_seed_loss(phi, seeds_feat);

      auto& cached = crf_cache[{idx, flip ? 1 : 0}];
      if (cached.step < 0 || step - cached.step >= cfg.crf_refresh) {
        NoGrad ng;
        auto phi_now = model.probs(img);
        auto planes = downsample_image_planes<T>(img_px.pixels, img_px.height,
                                                 img_px.width, stride);
        cached.r = mean_field<T>(planes, phi_now.dim(1), phi_now.dim(2),
                                 phi_now.data(), ds.num_classes + 1, crf);
        cached.step = step;
      }
      auto r = Tensor<T>::from_data(phi.shape(), cached.r);
      auto l_bnd = boundary_loss(phi, r);
      auto total = add(l_seed, l_bnd);
      step_seed += static_cast<double>(l_seed.item());
      step_bnd += static_cast<double>(l_bnd.item());
      backward(scale(total, 1.0 / cfg.batch_size));
    }
    if (!std::isfinite(step_seed + step_bnd)) detail::divergence("train_seg", step);
    opt.step();
    acc_seed += step_seed / cfg.batch_size;
    acc_bnd += step_bnd / cfg.batch_size;
    ++acc_n;
    if ((step + 1) % cfg.log_interval == 0 || step + 1 == cfg.seg_iterations) {
      if (log)
        log({{"step", step + 1},
             {"lr", opt.lr()},
             {"L_balance_seed", acc_seed / acc_n},
             {"L_boundary", acc_bnd / acc_n}});
      acc_seed = acc_bnd = 0;
      acc_n = 0;
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

// Fraction of correct per-class presence decisions (score > 0.5), percent.
template <typename T = float>
double classification_accuracy(const PipelineConfig& cfg, const SganModel<T>& model,
                               const std::vector<Sample>& samples) {
  require(!samples.empty(), "classification_accuracy: empty split");
  NoGrad ng;
  const int stride = cfg.backbone.stride();
  int64_t correct = 0, total = 0;
  for (const Sample& s : samples) {
    auto o = model.forward(to_input_tensor<T>(s.image),
                           detail::saliency_feat(s, stride, false));
    auto tau = label_vector<T>(s.labels, model.config().num_classes);
    for (int m = 0; m < model.config().num_classes; ++m) {
      const bool pred = o.scores.data()[m] > T(0.5);
      correct += pred == (tau[m] > T(0.5)) ? 1 : 0;
      ++total;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

// Class probabilities bilinearly upsampled to image resolution, then argmax
// (ties resolve to the lowest class id, background first).
template <typename T = float>
GrayImage predict_mask(const PipelineConfig& cfg, const SegNet<T>& model, const Sample& s) {
  NoGrad ng;
  auto phi = model.probs(to_input_tensor<T>(s.image));
  CamStack stack;
  stack.classes = phi.dim(0);
  stack.h = phi.dim(1);
  stack.w = phi.dim(2);
  stack.v.assign(phi.data().begin(), phi.data().end());
  stack = upsample_cams(stack, cfg.backbone.stride());
  GrayImage pred;
  pred.width = stack.w;
  pred.height = stack.h;
  pred.pixels.resize(static_cast<size_t>(stack.h) * stack.w);
  for (int y = 0; y < stack.h; ++y)
    for (int x = 0; x < stack.w; ++x) {
      int best = 0;
      double best_v = stack.at(0, y, x);
      for (int z = 1; z < stack.classes; ++z)
        if (stack.at(z, y, x) > best_v) {
          best_v = stack.at(z, y, x);
          best = z;
        }
      pred.at(y, x) = static_cast<uint8_t>(best);
    }
  return pred;
}

template <typename T = float>
SegReport evaluate_segnet(const PipelineConfig& cfg, const SegNet<T>& model,
                          const std::vector<Sample>& samples, int num_classes) {
  std::vector<GrayImage> preds, gts;
  for (const Sample& s : samples) {
    preds.push_back(predict_mask(cfg, model, s));
    gts.push_back(s.mask);
  }
  return evaluate_segmentation(preds, gts, num_classes);
}

inline SeedReport evaluate_seed_masks(const std::vector<GrayImage>& seed_masks,
                                      const Dataset& ds, int stride_if_feature_res = 1) {
  std::vector<GrayImage> gts;
  for (const Sample& s : ds.train)
    gts.push_back(stride_if_feature_res == 1
                      ? s.mask
                      : downsample_nearest(s.mask, stride_if_feature_res));
  return evaluate_seeds(seed_masks, gts, ds.num_classes);
}

// ---------------------------------------------------------------------------
// visualization
// ---------------------------------------------------------------------------

inline GrayImage heatmap_image(const std::vector<double>& values, int h, int w) {
  require(h > 0 && w > 0 && static_cast<int>(values.size()) == h * w,
          "heatmap: size mismatch");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  GrayImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(values.size());
  const double span = hi - lo;
  for (size_t i = 0; i < values.size(); ++i)
    img.pixels[i] = span > 0
                        ? static_cast<uint8_t>(std::lround((values[i] - lo) / span * 255.0))
                        : 0;
  return img;
}

// Class activation map heatmap at feature resolution.
template <typename T = float>
GrayImage viz_cam(const PipelineConfig& cfg, const SganModel<T>& model, const Sample& s,
                  int cls) {
  require(cls >= 1 && cls <= model.config().num_classes,
          "viz: class " + std::to_string(cls) + " outside 1.." +
              std::to_string(model.config().num_classes));
  NoGrad ng;
  auto o = model.forward(to_input_tensor<T>(s.image),
                         detail::saliency_feat(s, cfg.backbone.stride(), false));
  const int h = o.cams.dim(1), w = o.cams.dim(2);
  std::vector<double> v(static_cast<size_t>(h) * w);
  for (int i = 0; i < h * w; ++i)
    v[i] = static_cast<double>(o.cams.data()[static_cast<size_t>(cls - 1) * h * w + i]);
  return heatmap_image(v, h, w);
}

// One attention column D_{.j} for the feature-grid pixel (r,c), as a heatmap.
template <typename T = float>
GrayImage viz_attention_column(const PipelineConfig& cfg, const SganModel<T>& model,
                               const Sample& s, int r, int col) {
  NoGrad ng;
  auto img = to_input_tensor<T>(s.image);
  const int stride = cfg.backbone.stride();
  const int h = s.image.height / stride, w = s.image.width / stride;
  require(r >= 0 && r < h && col >= 0 && col < w,
          "viz: pixel (" + std::to_string(r) + "," + std::to_string(col) +
              ") outside the " + std::to_string(h) + "x" + std::to_string(w) +
              " feature grid");
  auto d = model.attention_map(img, detail::saliency_feat(s, stride, false));
  const int n = h * w, j = r * w + col;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = static_cast<double>(d.data()[static_cast<size_t>(i) * n + j]);
  return heatmap_image(v, h, w);
}

}  // namespace sgan
