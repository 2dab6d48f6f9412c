#pragma once
// Saliency-guided self-attention: pairwise feature similarity, a binary
// same-saliency-status mask, clamp + mask + linear row normalization, and a
// gamma-gated residual aggregation.
//
// Conventions: a feature map [C,h,w] flattens positions row-major to N = h*w
// columns of a [C,N] matrix. P_ij is the inner product of the key embedding
// at position i with the query embedding at position j. D rows are the
// propagation weights: enhanced position i mixes in sum_j D_ij X_j.

#include <cstdint>
#include <vector>

#include "sgan/backbone.hpp"
#include "sgan/ops.hpp"
#include "sgan/tensor.hpp"

namespace sgan {

template <typename T = float>
struct AttentionParams {
  Conv2dLayer<T> key_proj, query_proj;  // 1x1, C -> C, no bias
  Tensor<T> gamma;                      // [1], starts at exactly 0

  AttentionParams() = default;
  AttentionParams(int channels, uint64_t seed)
      : key_proj(channels, channels, 1, 1, 0, /*bias=*/false, seed, "attention.key"),
        query_proj(channels, channels, 1, 1, 0, /*bias=*/false, seed, "attention.query"),
        gamma(Tensor<T>::zeros({1}, /*requires_grad=*/true)) {}

  void collect(NamedTensors<T>& out) const {
    key_proj.collect(out, "attention.key");
    query_proj.collect(out, "attention.query");
    out.add("attention.gamma", gamma);
  }
};

// P = K^T Q over flattened positions: [C,h,w] -> [N,N].
template <typename T>
Tensor<T> spatial_attention(const Tensor<T>& x, const AttentionParams<T>& params) {
  require(x.defined() && x.shape().size() == 3,
          "spatial_attention: input must be [C,h,w], got " +
              (x.defined() ? shape_str(x.shape()) : std::string("<undefined>")));
  const int c = x.dim(0), n = x.dim(1) * x.dim(2);
  auto kf = reshape(params.key_proj.forward(x), {c, n});
  auto qf = reshape(params.query_proj.forward(x), {c, n});
  return matmul(transpose2d(kf), qf);
}

// S_ij = 1 iff B_i == B_j. Materialized row-major; only tests and
// visualization should ever build the full N*N matrix.
inline std::vector<uint8_t> saliency_attention(const std::vector<uint8_t>& b) {
  for (uint8_t v : b)
    require(v == 0 || v == 1, "saliency_attention: mask must be binary");
  const size_t n = b.size();
  std::vector<uint8_t> s(n * n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) s[i * n + j] = b[i] == b[j] ? 1 : 0;
  return s;
}

// D_ij = max(P_ij,0) * S_ij / (sum_j max(P_ij,0) * S_ij + eps). Rows whose
// masked support carries no positive mass come out all-zero.
template <typename T>
Tensor<T> context_attention(const Tensor<T>& p, const std::vector<uint8_t>& b,
                            double eps = 1e-8) {
  return row_normalize(pair_mask(clamp_min(p, 0.0), b), eps);
}

// E_i = gamma * sum_j D_ij X_j + X_i, computed as X D^T in flat form. With
// gamma exactly 0 the scaled term is exactly 0 and E is bitwise X.
template <typename T>
Tensor<T> enhance(const Tensor<T>& x, const Tensor<T>& d, const Tensor<T>& gamma) {
  require(x.defined() && x.shape().size() == 3,
          "enhance: input must be [C,h,w], got " +
              (x.defined() ? shape_str(x.shape()) : std::string("<undefined>")));
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int n = h * w;
  require(d.defined() && d.shape() == Shape({n, n}),
          "enhance: attention must be [N,N] with N=" + std::to_string(n) + ", got " +
              (d.defined() ? shape_str(d.shape()) : std::string("<undefined>")));
  auto xf = reshape(x, {c, n});
  auto mixed = matmul(xf, transpose2d(d));
  return reshape(add(scalar_scale(gamma, mixed), xf), {c, h, w});
}

// Binarize a [0,1] saliency map at t_b: B_i = 1 iff saliency_i >= t_b.
inline std::vector<uint8_t> binarize(const std::vector<double>& saliency, double t_b) {
  require(t_b >= 0.0 && t_b <= 1.0, "binarize: threshold outside [0,1]");
  std::vector<uint8_t> b(saliency.size());
  for (size_t i = 0; i < saliency.size(); ++i) {
    require(saliency[i] >= 0.0 && saliency[i] <= 1.0,
            "binarize: saliency value " + std::to_string(saliency[i]) + " outside [0,1]");
    b[i] = saliency[i] >= t_b ? 1 : 0;
  }
  return b;
}

// Full module: spatial attention, saliency mask, context attention, enhance.
// The saliency map is a constant (no gradient); length must equal h*w.
template <typename T>
Tensor<T> sgan_forward(const Tensor<T>& x, const std::vector<double>& saliency,
                       double t_b, const AttentionParams<T>& params) {
  require(x.defined() && x.shape().size() == 3,
          "sgan_forward: input must be [C,h,w]");
  require(static_cast<int>(saliency.size()) == x.dim(1) * x.dim(2),
          "sgan_forward: saliency length " + std::to_string(saliency.size()) +
              " does not match h*w=" + std::to_string(x.dim(1) * x.dim(2)));
  auto b = binarize(saliency, t_b);
  auto p = spatial_attention(x, params);
  auto d = context_attention(p, b);
  return enhance(x, d, params.gamma);
}

}  // namespace sgan
