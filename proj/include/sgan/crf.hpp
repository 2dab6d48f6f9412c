#pragma once
// Dense-CRF mean-field inference, naive O(N^2) message passing.
//
// Unary = -log(phi). Each round computes, per position i and class z,
//   m_i(z) = sum_{j != i} (w_spatial*k_spatial(i,j) + w_bilateral*k_bilateral(i,j)) Q_j(z)
// and renormalizes Q_i = softmax_z(-U_i(z) + m_i(z)). With Potts
// compatibility the like-label message enters with opposite sign to the
// cross-label mass; the cross-label part is constant per position and drops
// out in the softmax, which leaves exactly the update above.
//
// Both kernels are Gaussian: k_spatial uses pixel distance with stddev
// theta_gamma, k_bilateral uses pixel distance (theta_alpha) and intensity
// distance (theta_beta, on [0,255] per channel).

#include <cmath>
#include <string>
#include <vector>

#include "sgan/tensor.hpp"

namespace sgan {

struct CrfParams {
  double w_spatial = 3.0;
  double w_bilateral = 5.0;
  double theta_gamma = 3.0;   // spatial kernel stddev, pixels
  double theta_alpha = 30.0;  // bilateral spatial stddev, pixels
  double theta_beta = 10.0;   // bilateral intensity stddev, [0,255] units
  int iterations = 5;
  int max_positions = 4096;   // N above this errors (messages are O(N^2))
  bool periodic = false;      // wraparound distances (translation tests only)

  void validate() const {
    require(w_spatial >= 0 && w_bilateral >= 0, "crf: kernel weights must be >= 0");
    require(theta_gamma > 0 && theta_alpha > 0 && theta_beta > 0,
            "crf: kernel stddevs must be > 0");
    require(iterations >= 0, "crf: iterations must be >= 0");
    require(max_positions >= 1, "crf: max_positions must be >= 1");
  }
};

namespace detail {

inline double axis_dist(int a, int b, int extent, bool periodic) {
  int d = a > b ? a - b : b - a;
  if (periodic) d = std::min(d, extent - d);
  return static_cast<double>(d);
}

}  // namespace detail

// image: planar [3,h,w] intensities in [0,255]; phi: [classes,h,w], a
// distribution over classes at every position. Returns R of phi's shape.
template <typename T>
std::vector<T> mean_field(const std::vector<T>& image, int h, int w,
                          const std::vector<T>& phi, int classes,
                          const CrfParams& params) {
  params.validate();
  require(h >= 1 && w >= 1, "crf: empty grid");
  const int n = h * w;
  require(n <= params.max_positions,
          "crf: " + std::to_string(n) + " positions exceed the cap of " +
              std::to_string(params.max_positions) +
              "; downsample the inputs before inference");
  require(static_cast<int64_t>(image.size()) == 3LL * n,
          "crf: image must be [3," + std::to_string(h) + "," + std::to_string(w) + "]");
  require(classes >= 1 && static_cast<int64_t>(phi.size()) == static_cast<int64_t>(classes) * n,
          "crf: phi size does not match [" + std::to_string(classes) + "," +
              std::to_string(h) + "," + std::to_string(w) + "]");
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int z = 0; z < classes; ++z) {
      T v = phi[static_cast<size_t>(z) * n + i];
      require(v >= T(0), "crf: phi has a negative entry");
      s += static_cast<double>(v);
    }
    require(std::abs(s - 1.0) < 1e-4,
            "crf: phi at position " + std::to_string(i) + " sums to " +
                std::to_string(s) + ", not a distribution");
  }

  // Unary potentials and the initial Q = softmax(-U) (phi renormalized after
  // the clamp).
  std::vector<double> unary(phi.size());
  for (size_t i = 0; i < phi.size(); ++i)
    unary[i] = -std::log(std::max(static_cast<double>(phi[i]), 1e-12));
  std::vector<double> q(phi.size());
  for (int i = 0; i < n; ++i) {
    double mx = -unary[i];
    for (int z = 1; z < classes; ++z)
      mx = std::max(mx, -unary[static_cast<size_t>(z) * n + i]);
    double denom = 0;
    for (int z = 0; z < classes; ++z) {
      double e = std::exp(-unary[static_cast<size_t>(z) * n + i] - mx);
      q[static_cast<size_t>(z) * n + i] = e;
      denom += e;
    }
    for (int z = 0; z < classes; ++z) q[static_cast<size_t>(z) * n + i] /= denom;
  }

  // Combined pairwise kernel, cached when small enough (4 MB of doubles).
  const double inv2g = 1.0 / (2.0 * params.theta_gamma * params.theta_gamma);
  const double inv2a = 1.0 / (2.0 * params.theta_alpha * params.theta_alpha);
  const double inv2b = 1.0 / (2.0 * params.theta_beta * params.theta_beta);
  auto kernel_at = [&](int i, int j) -> double {
    const double dx = detail::axis_dist(i % w, j % w, w, params.periodic);
    const double dy = detail::axis_dist(i / w, j / w, h, params.periodic);
    const double d2 = dx * dx + dy * dy;
    double color2 = 0;
    for (int c = 0; c < 3; ++c) {
      double dc = static_cast<double>(image[static_cast<size_t>(c) * n + i]) -
                  static_cast<double>(image[static_cast<size_t>(c) * n + j]);
      color2 += dc * dc;
    }
    return params.w_spatial * std::exp(-d2 * inv2g) +
           params.w_bilateral * std::exp(-d2 * inv2a - color2 * inv2b);
  };
  const bool cache = n <= 1024;
  std::vector<double> kmat;
  if (cache) {
    kmat.resize(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
      kmat[static_cast<size_t>(i) * n + i] = 0.0;
      for (int j = i + 1; j < n; ++j) {
        double k = kernel_at(i, j);
        kmat[static_cast<size_t>(i) * n + j] = k;
        kmat[static_cast<size_t>(j) * n + i] = k;
      }
    }
  }

  std::vector<double> msg(phi.size());
  std::vector<double> next(phi.size());
  for (int it = 0; it < params.iterations; ++it) {
    std::fill(msg.begin(), msg.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      if (cache) {
        const double* krow = kmat.data() + static_cast<size_t>(i) * n;
        for (int z = 0; z < classes; ++z) {
          const double* qz = q.data() + static_cast<size_t>(z) * n;
          double acc = 0;
          for (int j = 0; j < n; ++j) acc += krow[j] * qz[j];
          msg[static_cast<size_t>(z) * n + i] = acc;
        }
      } else {
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const double k = kernel_at(i, j);
          for (int z = 0; z < classes; ++z)
            msg[static_cast<size_t>(z) * n + i] += k * q[static_cast<size_t>(z) * n + j];
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      double mx = -1e300;
      for (int z = 0; z < classes; ++z)
        mx = std::max(mx, -unary[static_cast<size_t>(z) * n + i] +
                              msg[static_cast<size_t>(z) * n + i]);
      double denom = 0;
      for (int z = 0; z < classes; ++z) {
        double e = std::exp(-unary[static_cast<size_t>(z) * n + i] +
                            msg[static_cast<size_t>(z) * n + i] - mx);
        next[static_cast<size_t>(z) * n + i] = e;
        denom += e;
      }
      for (int z = 0; z < classes; ++z) next[static_cast<size_t>(z) * n + i] /= denom;
    }
    q.swap(next);
  }

  std::vector<T> r(phi.size());
  for (size_t i = 0; i < r.size(); ++i) r[i] = static_cast<T>(q[i]);
  return r;
}

// Area-average downsample of a [3,H,W] byte image to feature resolution,
// producing the [3,h,w] float planes mean_field expects.
template <typename T>
std::vector<T> downsample_image_planes(const std::vector<uint8_t>& rgb_interleaved,
                                       int h, int w, int stride) {
  require(stride >= 1 && h % stride == 0 && w % stride == 0,
          "downsample_image_planes: size not divisible by stride");
  const int ho = h / stride, wo = w / stride;
  std::vector<T> out(static_cast<size_t>(3) * ho * wo, T(0));
  const double inv = 1.0 / (stride * stride);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out[(static_cast<size_t>(c) * ho + y / stride) * wo + x / stride] +=
            static_cast<T>(rgb_interleaved[(static_cast<size_t>(y) * w + x) * 3 + c] * inv);
  return out;
}

}  // namespace sgan
