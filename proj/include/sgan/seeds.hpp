#pragma once
// Seed retrieval: initial seeds by thresholding baseline class activation
// maps, final seeds from the two-branch ensemble plus saliency-derived
// background, and the ground-truth substitution used for the strongly
// annotated fraction in semi-supervised runs.
//
// Seed mask palette (PGM bytes): 0 = background, 255 = unlabeled,
// k = foreground class k (1..M).

#include <algorithm>
#include <utility>
#include <vector>

#include "sgan/data.hpp"
#include "sgan/tensor.hpp"

namespace sgan {

// Per-class spatial response maps in [0,1]; absent classes are all-zero.
struct CamStack {
  int classes = 0, h = 0, w = 0;
  std::vector<double> v;  // [classes,h,w]

  double at(int z, int y, int x) const {
    return v[(static_cast<size_t>(z) * h + y) * w + x];
  }
  double& at(int z, int y, int x) {
    return v[(static_cast<size_t>(z) * h + y) * w + x];
  }
};

// Clamp at zero and max-normalize each present class plane to [0,1]; planes
// of absent classes (and planes with no positive response) are zeroed.
// labels are 1-based class ids.
template <typename T>
CamStack normalize_cams(const Tensor<T>& raw, const std::vector<int>& labels) {
  require(raw.defined() && raw.shape().size() == 3, "normalize_cams: raw must be [M,h,w]");
  CamStack out;
  out.classes = raw.dim(0);
  out.h = raw.dim(1);
  out.w = raw.dim(2);
  out.v.assign(raw.numel(), 0.0);
  const int plane = out.h * out.w;
  for (int c : labels) {
    require(c >= 1 && c <= out.classes,
            "normalize_cams: label " + std::to_string(c) + " outside 1.." +
                std::to_string(out.classes));
    const T* src = raw.data().data() + static_cast<size_t>(c - 1) * plane;
    double mx = 0;
    for (int i = 0; i < plane; ++i) mx = std::max(mx, static_cast<double>(src[i]));
    if (mx <= 0) continue;
    double* dst = out.v.data() + static_cast<size_t>(c - 1) * plane;
    for (int i = 0; i < plane; ++i)
      dst[i] = std::max(static_cast<double>(src[i]), 0.0) / mx;
  }
  return out;
}

// Element-wise sum of two normalized stacks, re-max-normalized per class.
inline CamStack ensemble_cams(const CamStack& a, const CamStack& b) {
  require(a.classes == b.classes && a.h == b.h && a.w == b.w,
          "ensemble_cams: shape mismatch");
  CamStack out = a;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
  const int plane = out.h * out.w;
  for (int z = 0; z < out.classes; ++z) {
    double* p = out.v.data() + static_cast<size_t>(z) * plane;
    double mx = *std::max_element(p, p + plane);
    if (mx > 0)
      for (int i = 0; i < plane; ++i) p[i] /= mx;
  }
  return out;
}

// Bilinear upsampling of every plane by an integer factor, sampling at cell
// centers (the usual half-pixel convention), with edge clamping. Thresholding
// nearest-replicated maps would claim a full stride-block for every boundary
// cell; interpolation lets the decision boundary land between cell centers.
inline CamStack upsample_cams(const CamStack& in, int stride) {
  require(stride >= 1, "upsample_cams: stride must be >= 1");
  CamStack out;
  out.classes = in.classes;
  out.h = in.h * stride;
  out.w = in.w * stride;
  out.v.resize(static_cast<size_t>(out.classes) * out.h * out.w);
  auto split = [&](int o, int n) {  // source index pair + lerp weight
    double s = (o + 0.5) / stride - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(n - 1));
    const int lo = static_cast<int>(s);
    return std::pair<int, double>{lo, s - lo};
  };
  for (int y = 0; y < out.h; ++y) {
    const auto [y0, fy] = split(y, in.h);
    const int y1 = std::min(y0 + 1, in.h - 1);
    for (int x = 0; x < out.w; ++x) {
      const auto [x0, fx] = split(x, in.w);
      const int x1 = std::min(x0 + 1, in.w - 1);
      for (int z = 0; z < out.classes; ++z)
        out.at(z, y, x) = (1 - fy) * ((1 - fx) * in.at(z, y0, x0) + fx * in.at(z, y0, x1)) +
                          fy * ((1 - fx) * in.at(z, y1, x0) + fx * in.at(z, y1, x1));
    }
  }
  return out;
}

// Foreground-only thresholding: pixel u gets class z when cam_z(u) > t;
// multi-class hits resolve by the largest response (first such class on
// ties); everything else is unlabeled.
inline GrayImage initial_seeds(const CamStack& cams, double t) {
  require(t > 0 && t < 1, "initial_seeds: threshold must lie in (0,1)");
  GrayImage mask;
  mask.width = cams.w;
  mask.height = cams.h;
  mask.pixels.assign(static_cast<size_t>(cams.h) * cams.w, kUnlabeled);
  for (int y = 0; y < cams.h; ++y)
    for (int x = 0; x < cams.w; ++x) {
      int best = -1;
      double best_v = t;
      for (int z = 0; z < cams.classes; ++z)
        if (cams.at(z, y, x) > best_v) {
          best_v = cams.at(z, y, x);
          best = z;
        }
      if (best >= 0) mask.at(y, x) = static_cast<uint8_t>(best + 1);
    }
  return mask;
}

// Foreground rule at threshold alpha plus background where the saliency
// value (scaled to [0,1]) falls below beta. A pixel matching both rules is a
// conflict and stays unlabeled.
inline GrayImage final_seeds(const CamStack& cams, const GrayImage& saliency,
                             double alpha, double beta) {
  require(alpha > 0 && alpha < 1 && beta > 0 && beta < 1,
          "final_seeds: thresholds must lie in (0,1)");
  require(saliency.width == cams.w && saliency.height == cams.h,
          "final_seeds: saliency " + std::to_string(saliency.width) + "x" +
              std::to_string(saliency.height) + " does not match cams " +
              std::to_string(cams.w) + "x" + std::to_string(cams.h));
  GrayImage fg = initial_seeds(cams, alpha);
  GrayImage mask = fg;
  for (int y = 0; y < cams.h; ++y)
    for (int x = 0; x < cams.w; ++x) {
      const bool is_bg = static_cast<double>(saliency.at(y, x)) / 255.0 < beta;
      if (!is_bg) continue;
      mask.at(y, x) = fg.at(y, x) == kUnlabeled ? kBackground : kUnlabeled;
    }
  return mask;
}

// Ground-truth substitution for a strongly annotated sample: the saliency
// override is the binary foreground of the ground truth (255 on foreground),
// the seed override is the ground truth itself (every pixel labeled).
inline std::pair<GrayImage, GrayImage> semi_substitute(const Sample& s) {
  require(s.full_supervision,
          "semi_substitute: sample " + s.id + " carries no full annotation");
  GrayImage sal;
  sal.width = s.mask.width;
  sal.height = s.mask.height;
  sal.pixels.resize(s.mask.pixels.size());
  for (size_t i = 0; i < s.mask.pixels.size(); ++i) {
    uint8_t v = s.mask.pixels[i];
    require(v != kUnlabeled, "semi_substitute: ground truth contains unlabeled pixels");
    sal.pixels[i] = v == kBackground ? 0 : 255;
  }
  return {sal, s.mask};
}

}  // namespace sgan
