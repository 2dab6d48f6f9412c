#pragma once
// Training objectives. Masks and CRF targets enter as constants; gradients
// flow only through the probability tensors (tau, phi).
//
// Seed masks use the palette 0 = background, 255 = unlabeled, k = class k.
// Foreground-only probability maps have M channels (channel z-1 = class z);
// full segmentation maps have M+1 channels (channel 0 = background,
// channel z = class z).

#include <cmath>
#include <string>
#include <vector>

#include "sgan/data.hpp"
#include "sgan/ops.hpp"
#include "sgan/tensor.hpp"

namespace sgan {

constexpr double kLogFloor = 1e-12;

// L = -(1/M) sum_m log(y_m*(tau_m - 1/2) + 1/2), y in {+1,-1}, argument
// clamped to [1e-12, 1] before the log.
template <typename T>
Tensor<T> classification_loss(const Tensor<T>& tau, const std::vector<int>& y) {
  require(tau.defined() && tau.shape().size() == 1,
          "classification_loss: tau must be [M]");
  const int m = tau.dim(0);
  require(static_cast<int>(y.size()) == m,
          "classification_loss: got " + std::to_string(y.size()) + " labels for M=" +
              std::to_string(m));
  std::vector<T> sign(m);
  for (int i = 0; i < m; ++i) {
    require(y[i] == 1 || y[i] == -1, "classification_loss: labels must be +1/-1");
    sign[i] = static_cast<T>(y[i]);
  }
  for (T v : tau.data())
    require(v >= T(0) && v <= T(1),
            "classification_loss: tau value " + std::to_string(v) + " outside [0,1]");
  auto s = Tensor<T>::from_data({m}, std::move(sign));
  auto arg = add_scalar(mul(add_scalar(tau, -0.5), s), 0.5);
  return scale(sum(sgan::log(clamp_min(arg, kLogFloor))), -1.0 / m);
}

namespace detail {

inline void check_seed_mask(const GrayImage& seeds, int num_classes, int h, int w,
                            const char* who) {
  require(seeds.height == h && seeds.width == w,
          std::string(who) + ": seed mask is " + std::to_string(seeds.width) + "x" +
              std::to_string(seeds.height) + ", expected " + std::to_string(w) + "x" +
              std::to_string(h));
  for (uint8_t v : seeds.pixels)
    require(v == kBackground || v == kUnlabeled || v <= num_classes,
            std::string(who) + ": seed value " + std::to_string(v) + " outside palette");
}

}  // namespace detail

// Eq-style seed loss over foreground classes only:
// L = -(1 / sum_z |L_z|) * sum_z sum_{u in L_z} log phi_{z,u}.
// phi has M channels. All-empty masks yield 0 and set *all_empty.
template <typename T>
Tensor<T> seed_loss(const Tensor<T>& phi, const GrayImage& seeds,
                    bool* all_empty = nullptr) {
  require(phi.defined() && phi.shape().size() == 3, "seed_loss: phi must be [M,h,w]");
  const int m = phi.dim(0), h = phi.dim(1), w = phi.dim(2);
  detail::check_seed_mask(seeds, m, h, w, "seed_loss");

  std::vector<T> indicator(phi.numel(), T(0));
  int64_t count = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      uint8_t v = seeds.at(y, x);
      if (v == kBackground || v == kUnlabeled) continue;
      indicator[(static_cast<size_t>(v - 1) * h + y) * w + x] = T(1);
      ++count;
    }
  if (all_empty) *all_empty = count == 0;
  if (count == 0) return Tensor<T>::scalar(T(0));
  auto ind = Tensor<T>::from_data(phi.shape(), std::move(indicator));
  auto logs = sgan::log(clamp_min(phi, kLogFloor));
  return scale(sum(mul(logs, ind)), -1.0 / static_cast<double>(count));
}

template <typename T>
Tensor<T> sgan_total(const Tensor<T>& l_cls, const Tensor<T>& l_seed, double lambda) {
  require(lambda >= 0, "sgan_total: lambda must be >= 0");
  return add(l_cls, scale(l_seed, lambda));
}

// Separate normalization of the foreground and background sides:
// L = -(1/N_fg) sum_fg log phi - (1/N_bg) sum_bg log phi_0.
// phi has M+1 channels; an empty side contributes 0.
template <typename T>
Tensor<T> balanced_seed_loss(const Tensor<T>& phi, const GrayImage& seeds) {
  require(phi.defined() && phi.shape().size() == 3,
          "balanced_seed_loss: phi must be [M+1,h,w]");
  const int ch = phi.dim(0), h = phi.dim(1), w = phi.dim(2);
  require(ch >= 2, "balanced_seed_loss: need a background channel plus classes");
  const int m = ch - 1;
  detail::check_seed_mask(seeds, m, h, w, "balanced_seed_loss");

  std::vector<T> fg(phi.numel(), T(0)), bg(phi.numel(), T(0));
  int64_t n_fg = 0, n_bg = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      uint8_t v = seeds.at(y, x);
      if (v == kUnlabeled) continue;
      if (v == kBackground) {
        bg[(static_cast<size_t>(0) * h + y) * w + x] = T(1);
        ++n_bg;
      } else {
        fg[(static_cast<size_t>(v) * h + y) * w + x] = T(1);
        ++n_fg;
      }
    }
  auto logs = sgan::log(clamp_min(phi, kLogFloor));
  Tensor<T> total = Tensor<T>::scalar(T(0));
  if (n_fg > 0) {
    auto ind = Tensor<T>::from_data(phi.shape(), std::move(fg));
    total = add(total, scale(sum(mul(logs, ind)), -1.0 / static_cast<double>(n_fg)));
  }
  if (n_bg > 0) {
    auto ind = Tensor<T>::from_data(phi.shape(), std::move(bg));
    total = add(total, scale(sum(mul(logs, ind)), -1.0 / static_cast<double>(n_bg)));
  }
  return total;
}

// Mean KL divergence from the CRF target R (a constant) to phi:
// (1/N) sum_u sum_z R_{z,u} log(R_{z,u} / phi_{z,u}), 0*log 0 := 0.
// N is the number of positions. No gradient flows into R.
template <typename T>
Tensor<T> boundary_loss(const Tensor<T>& phi, const Tensor<T>& r) {
  require(phi.defined() && r.defined() && phi.shape().size() == 3,
          "boundary_loss: phi and r must be [C,h,w]");
  require(phi.shape() == r.shape(),
          "boundary_loss: shape mismatch " + shape_str(phi.shape()) + " vs " +
              shape_str(r.shape()));
  const int64_t n = static_cast<int64_t>(phi.dim(1)) * phi.dim(2);

  // constant side: (1/N) sum R log R
  double entropy_term = 0;
  for (T v : r.data()) {
    require(v >= T(0), "boundary_loss: r must be non-negative");
    if (v > T(0)) entropy_term += static_cast<double>(v) * std::log(static_cast<double>(v));
  }
  entropy_term /= static_cast<double>(n);

  auto r_const = Tensor<T>::from_data(r.shape(), r.data());  // detached copy
  auto cross = scale(sum(mul(r_const, sgan::log(clamp_min(phi, kLogFloor)))),
                     -1.0 / static_cast<double>(n));
  return add_scalar(cross, entropy_term);
}

}  // namespace sgan
