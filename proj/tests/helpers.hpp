#pragma once
// Shared test utilities: independent reference implementations used as
// oracles, plus small conveniences for filling tensors with random data.

#include <algorithm>
#include <cmath>
#include <vector>

#include "sgan/rng.hpp"
#include "sgan/tensor.hpp"

namespace testutil {

template <typename T>
std::vector<T> random_vec(size_t n, sgan::Pcg32& rng, T lo = T(-1), T hi = T(1)) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
  return v;
}

// Reference convolution written as the definition: six nested loops over
// output channel, output position, input channel and kernel position.
// x: [Ci,H,W], w: [Co,Ci,kh,kw], bias: [Co] (empty = none) -> [Co,Ho,Wo].
template <typename T>
std::vector<T> naive_conv2d(const std::vector<T>& x, int ci, int h, int w,
                            const std::vector<T>& wt, int co, int kh, int kw,
                            const std::vector<T>& bias, int stride, int pad) {
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  std::vector<T> out(static_cast<size_t>(co) * ho * wo, T(0));
  for (int oc = 0; oc < co; ++oc)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        T acc = bias.empty() ? T(0) : bias[oc];
        for (int ic = 0; ic < ci; ++ic)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int iy = oy * stride - pad + ky;
              const int ix = ox * stride - pad + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += x[(static_cast<size_t>(ic) * h + iy) * w + ix] *
                     wt[((static_cast<size_t>(oc) * ci + ic) * kh + ky) * kw + kx];
            }
        out[(static_cast<size_t>(oc) * ho + oy) * wo + ox] = acc;
      }
  return out;
}

// Reference max pooling, same loop-from-the-definition style.
template <typename T>
std::vector<T> naive_maxpool2d(const std::vector<T>& x, int c, int h, int w,
                               int kernel, int stride) {
  const int ho = (h - kernel) / stride + 1;
  const int wo = (w - kernel) / stride + 1;
  std::vector<T> out(static_cast<size_t>(c) * ho * wo);
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        T best = x[(static_cast<size_t>(ch) * h + oy * stride) * w + ox * stride];
        for (int ky = 0; ky < kernel; ++ky)
          for (int kx = 0; kx < kernel; ++kx)
            best = std::max(best, x[(static_cast<size_t>(ch) * h + oy * stride + ky) * w +
                                    ox * stride + kx]);
        out[(static_cast<size_t>(ch) * ho + oy) * wo + ox] = best;
      }
  return out;
}

// Reference matrix product.
template <typename T>
std::vector<T> naive_matmul(const std::vector<T>& a, const std::vector<T>& b, int m,
                            int k, int n) {
  std::vector<T> out(static_cast<size_t>(m) * n, T(0));
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p)
      for (int j = 0; j < n; ++j)
        out[static_cast<size_t>(i) * n + j] +=
            a[static_cast<size_t>(i) * k + p] * b[static_cast<size_t>(p) * n + j];
  return out;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.size() != b.size()) return 1e300;
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

}  // namespace testutil
