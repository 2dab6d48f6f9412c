#pragma once
// Convolutional backbone and the two heads that sit on top of it: the
// image-level classifier (global average pool + linear + sigmoid, whose
// weights double as class activation map weights) and the per-position
// segmentation branch (1x1 conv).
//
// Every parameter draws its initial values from a PCG stream derived from the
// parameter's own name, so the presence or absence of one component never
// shifts the initialization of another.

#include <cmath>
#include <string>
#include <vector>

#include "sgan/checkpoint.hpp"
#include "sgan/ops.hpp"
#include "sgan/rng.hpp"
#include "sgan/tensor.hpp"

namespace sgan {

// FNV-1a, used to give each named parameter its own RNG stream.
inline uint64_t name_stream(const std::string& name) {
  uint64_t h = 1469598103934665603ull;
  for (char c : name) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

template <typename T>
Tensor<T> init_normal(const Shape& shape, double stddev, uint64_t seed,
                      const std::string& name) {
  Pcg32 rng(seed, name_stream(name));
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.normal(0.0, stddev));
  return Tensor<T>::from_data(shape, std::move(v), /*requires_grad=*/true);
}

template <typename T = float>
struct Conv2dLayer {
  Tensor<T> w, b;
  int stride = 1, pad = 0;

  Conv2dLayer() = default;
  // He-style fan-in initialization unless an explicit stddev is given.
  Conv2dLayer(int cin, int cout, int k, int stride_, int pad_, bool bias,
              uint64_t seed, const std::string& name, double stddev = -1.0)
      : stride(stride_), pad(pad_) {
    if (stddev < 0) stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    w = init_normal<T>({cout, cin, k, k}, stddev, seed, name + ".w");
    if (bias) b = Tensor<T>::zeros({cout}, /*requires_grad=*/true);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return b.defined() ? conv2d(x, w, b, stride, pad) : conv2d(x, w, stride, pad);
  }

  void collect(NamedTensors<T>& out, const std::string& prefix) const {
    out.add(prefix + ".w", w);
    if (b.defined()) out.add(prefix + ".b", b);
  }
};

struct BackboneConfig {
  int in_channels = 3;
  std::vector<int> channels = {16, 32, 64, 64};  // conv blocks, 3x3 pad 1
  std::vector<int> pool_after = {0, 1};          // 2x2/2 max pool after these blocks

  int out_channels() const { return channels.back(); }
  int stride() const { return 1 << pool_after.size(); }
};

// Stack of conv+relu blocks with interleaved max pools. [Cin,H,W] ->
// [Cout,H/s,W/s] where s = 2^(number of pools).
template <typename T = float>
class Backbone {
 public:
  Backbone() = default;
  Backbone(const BackboneConfig& cfg, uint64_t seed) : cfg_(cfg) {
    require(!cfg.channels.empty(), "backbone: need at least one conv block");
    int cin = cfg.in_channels;
    for (size_t i = 0; i < cfg.channels.size(); ++i) {
      blocks_.emplace_back(cin, cfg.channels[i], 3, 1, 1, /*bias=*/true, seed,
                           "backbone.block" + std::to_string(i));
      cin = cfg.channels[i];
    }
    for (int p : cfg.pool_after)
      require(p >= 0 && p < static_cast<int>(cfg.channels.size()),
              "backbone: pool_after index " + std::to_string(p) + " out of range");
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> h = x;
    for (size_t i = 0; i < blocks_.size(); ++i) {
      h = relu(blocks_[i].forward(h));
      for (int p : cfg_.pool_after)
        if (p == static_cast<int>(i)) h = maxpool2d(h, 2, 2);
    }
    return h;
  }

  const BackboneConfig& config() const { return cfg_; }

  void collect(NamedTensors<T>& out) const {
    for (size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].collect(out, "backbone.block" + std::to_string(i));
  }

 private:
  BackboneConfig cfg_;
  std::vector<Conv2dLayer<T>> blocks_;
};

// Global average pool followed by a bias-free linear map to per-class scores.
// The same weight matrix turns feature maps into class activation maps.
template <typename T = float>
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(int in_channels, int num_classes, uint64_t seed)
      : in_channels_(in_channels), num_classes_(num_classes) {
    w_ = init_normal<T>({num_classes, in_channels}, 0.01, seed, "classifier.w");
  }

  // [C,h,w] -> sigmoid scores [M]
  Tensor<T> scores(const Tensor<T>& feat) const {
    auto pooled = reshape(global_avg_pool(feat), {in_channels_, 1});
    return sigmoid(reshape(matmul(w_, pooled), {num_classes_}));
  }

  // [C,h,w] -> raw class activation maps [M,h,w] (pre-normalization)
  Tensor<T> cams(const Tensor<T>& feat) const {
    const int h = feat.dim(1), w = feat.dim(2);
    auto flat = reshape(feat, {in_channels_, h * w});
    return reshape(matmul(w_, flat), {num_classes_, h, w});
  }

  void collect(NamedTensors<T>& out) const { out.add("classifier.w", w_); }

 private:
  int in_channels_ = 0, num_classes_ = 0;
  Tensor<T> w_;
};

// 1x1 conv producing per-position class maps.
template <typename T = float>
class SegHead {
 public:
  SegHead() = default;
  SegHead(int in_channels, int maps, uint64_t seed, const std::string& name)
      : name_(name), conv_(in_channels, maps, 1, 1, 0, /*bias=*/true, seed, name, 0.01) {}

  Tensor<T> forward(const Tensor<T>& feat) const { return conv_.forward(feat); }
  void collect(NamedTensors<T>& out) const { conv_.collect(out, name_); }

 private:
  std::string name_;
  Conv2dLayer<T> conv_;
};

}  // namespace sgan
