#pragma once
// Primitive operations over Tensor with analytic reverse-mode gradients.
//
// Shape rules follow the usual conventions (conv: H' = (H + 2p - k)/s + 1).
// Only scalar-tensor broadcasting is supported; anything else needs an
// explicit reshape. log() rejects non-positive inputs, callers clamp first.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "sgan/tensor.hpp"

namespace sgan {

// Records the discrete decisions (relu/clamp sign, maxpool argmax) taken
// during a forward pass. The finite-difference harness compares the traces of
// the two perturbed evaluations and skips coordinates that flipped a decision,
// i.e. coordinates within the step of a kink.
struct KinkTrace {
  static bool& enabled() {
    thread_local bool e = false;
    return e;
  }
  static std::vector<int64_t>& events() {
    thread_local std::vector<int64_t> v;
    return v;
  }
  static void clear() { events().clear(); }
};

namespace detail {

template <typename T>
std::shared_ptr<Node<T>> make_node(Shape shape, std::vector<T> value,
                                   std::vector<std::shared_ptr<Node<T>>> parents,
                                   const char* op) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  if (grad_mode()) {
    bool rg = false;
    for (auto& p : parents) rg = rg || (p && p->requires_grad);
    if (rg) {
      n->requires_grad = true;
      n->grad.assign(n->value.size(), T(0));
      n->parents = std::move(parents);
    }
  }
  return n;
}

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    T* crow = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      T av = arow[p];
      const T* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
template <typename T>
void gemm_abt_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<size_t>(j) * k;
      T s = 0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[static_cast<size_t>(i) * n + j] += s;
    }
  }
}

// C[m,n] += A[k,m]^T * B[k,n]
template <typename T>
void gemm_atb_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const T* arow = a + static_cast<size_t>(p) * m;
    const T* brow = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      T av = arow[i];
      T* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void im2col(const T* x, int ci, int h, int w, int kh, int kw, int stride, int pad,
            int ho, int wo, T* col) {
  const int npos = ho * wo;
  for (int c = 0; c < ci; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        T* dst = col + (static_cast<size_t>(c) * kh * kw + ky * kw + kx) * npos;
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < wo; ++ox) dst[oy * wo + ox] = T(0);
            continue;
          }
          const T* src = x + (static_cast<size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * stride - pad + kx;
            dst[oy * wo + ox] = (ix < 0 || ix >= w) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_acc(const T* col, int ci, int h, int w, int kh, int kw, int stride,
                int pad, int ho, int wo, T* x) {
  const int npos = ho * wo;
  for (int c = 0; c < ci; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const T* src = col + (static_cast<size_t>(c) * kh * kw + ky * kw + kx) * npos;
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          T* dst = x + (static_cast<size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// convolution and pooling
// ---------------------------------------------------------------------------

// x: [Ci,H,W], w: [Co,Ci,kh,kw], bias: [Co] or undefined. dilation is fixed at 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int stride, int pad) {
  auto xn = x.node(), wn = w.node();
  require(xn && wn, "conv2d: undefined input");
  require(xn->shape.size() == 3, "conv2d: input must be [C,H,W], got " + shape_str(xn->shape));
  require(wn->shape.size() == 4,
          "conv2d: kernel must be [Co,Ci,kh,kw], got " + shape_str(wn->shape));
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(pad >= 0, "conv2d: pad must be >= 0");
  const int ci = xn->shape[0], h = xn->shape[1], wdt = xn->shape[2];
  const int co = wn->shape[0], kh = wn->shape[2], kw = wn->shape[3];
  require(wn->shape[1] == ci, "conv2d: channel mismatch between input " +
                                  shape_str(xn->shape) + " and kernel " + shape_str(wn->shape));
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (wdt + 2 * pad - kw) / stride + 1;
  require(h + 2 * pad >= kh && wdt + 2 * pad >= kw,
          "conv2d: kernel " + shape_str(wn->shape) + " larger than padded input " +
              shape_str(xn->shape));
  std::shared_ptr<Node<T>> bn;
  if (bias.defined()) {
    bn = bias.node();
    require(bn->shape.size() == 1 && bn->shape[0] == co,
            "conv2d: bias must be [Co]=" + std::to_string(co) + ", got " +
                shape_str(bn->shape));
  }

  const int k = ci * kh * kw;
  const int npos = ho * wo;
  auto col = std::make_shared<std::vector<T>>(static_cast<size_t>(k) * npos);
  detail::im2col(xn->value.data(), ci, h, wdt, kh, kw, stride, pad, ho, wo, col->data());

  std::vector<T> out(static_cast<size_t>(co) * npos, T(0));
  detail::gemm_acc(wn->value.data(), col->data(), out.data(), co, k, npos);
  if (bn) {
    for (int c = 0; c < co; ++c) {
      T bv = bn->value[c];
      T* row = out.data() + static_cast<size_t>(c) * npos;
      for (int i = 0; i < npos; ++i) row[i] += bv;
    }
  }

  std::vector<std::shared_ptr<Node<T>>> parents{xn, wn};
  if (bn) parents.push_back(bn);
  auto n = detail::make_node<T>({co, ho, wo}, std::move(out), std::move(parents), "conv2d");
  if (n->requires_grad) {
    n->backprop = [xn, wn, bn, col, ci, h, wdt, kh, kw, stride, pad, ho, wo, co,
                   k, npos](Node<T>& self) {
      const T* gy = self.grad.data();
      if (wn->requires_grad)
        detail::gemm_abt_acc(gy, col->data(), wn->grad.data(), co, npos, k);
      if (bn && bn->requires_grad) {
        for (int c = 0; c < co; ++c) {
          T s = 0;
          const T* row = gy + static_cast<size_t>(c) * npos;
          for (int i = 0; i < npos; ++i) s += row[i];
          bn->grad[c] += s;
        }
      }
      if (xn->requires_grad) {
        std::vector<T> dcol(static_cast<size_t>(k) * npos, T(0));
        detail::gemm_atb_acc(wn->value.data(), gy, dcol.data(), k, co, npos);
        detail::col2im_acc(dcol.data(), ci, h, wdt, kh, kw, stride, pad, ho, wo,
                           xn->grad.data());
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad) {
  return conv2d(x, w, Tensor<T>(), stride, pad);
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, int kernel, int stride) {
  auto xn = x.node();
  require(xn && xn->shape.size() == 3,
          "maxpool2d: input must be [C,H,W], got " + shape_str(xn ? xn->shape : Shape{}));
  require(kernel >= 1 && stride >= 1, "maxpool2d: kernel and stride must be >= 1");
  const int c = xn->shape[0], h = xn->shape[1], w = xn->shape[2];
  require(h >= kernel && w >= kernel,
          "maxpool2d: window " + std::to_string(kernel) + " larger than input " +
              shape_str(xn->shape));
  const int ho = (h - kernel) / stride + 1;
  const int wo = (w - kernel) / stride + 1;
  std::vector<T> out(static_cast<size_t>(c) * ho * wo);
  auto arg = std::make_shared<std::vector<int32_t>>(out.size());
  for (int ch = 0; ch < c; ++ch) {
    const T* plane = xn->value.data() + static_cast<size_t>(ch) * h * w;
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        int iy0 = oy * stride, ix0 = ox * stride;
        T best = plane[iy0 * w + ix0];
        int besti = iy0 * w + ix0;
        for (int ky = 0; ky < kernel; ++ky)
          for (int kx = 0; kx < kernel; ++kx) {
            int idx = (iy0 + ky) * w + ix0 + kx;
            if (plane[idx] > best) {
              best = plane[idx];
              besti = idx;
            }
          }
        size_t o = (static_cast<size_t>(ch) * ho + oy) * wo + ox;
        out[o] = best;
        (*arg)[o] = besti;
      }
    }
  }
  if (KinkTrace::enabled())
    for (int32_t a : *arg) KinkTrace::events().push_back(a);

  auto n = detail::make_node<T>({c, ho, wo}, std::move(out), {xn}, "maxpool2d");
  if (n->requires_grad) {
    n->backprop = [xn, arg, c, h, w, ho, wo](Node<T>& self) {
      for (int ch = 0; ch < c; ++ch) {
        T* gplane = xn->grad.data() + static_cast<size_t>(ch) * h * w;
        const size_t base = static_cast<size_t>(ch) * ho * wo;
        for (int i = 0; i < ho * wo; ++i)
          gplane[(*arg)[base + i]] += self.grad[base + i];
      }
    };
  }
  return Tensor<T>(n);
}

// [C,H,W] -> [C]
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  auto xn = x.node();
  require(xn && xn->shape.size() == 3,
          "global_avg_pool: input must be [C,H,W], got " + shape_str(xn ? xn->shape : Shape{}));
  const int c = xn->shape[0];
  const int hw = xn->shape[1] * xn->shape[2];
  std::vector<T> out(c);
  for (int ch = 0; ch < c; ++ch) {
    T s = 0;
    const T* plane = xn->value.data() + static_cast<size_t>(ch) * hw;
    for (int i = 0; i < hw; ++i) s += plane[i];
    out[ch] = s / static_cast<T>(hw);
  }
  auto n = detail::make_node<T>({c}, std::move(out), {xn}, "global_avg_pool");
  if (n->requires_grad) {
    n->backprop = [xn, c, hw](Node<T>& self) {
      for (int ch = 0; ch < c; ++ch) {
        T g = self.grad[ch] / static_cast<T>(hw);
        T* plane = xn->grad.data() + static_cast<size_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) plane[i] += g;
      }
    };
  }
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// linear algebra and shape
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  auto an = a.node(), bn = b.node();
  require(an && bn, "matmul: undefined input");
  require(an->shape.size() == 2 && bn->shape.size() == 2,
          "matmul: inputs must be 2-d, got " + shape_str(an->shape) + " and " +
              shape_str(bn->shape));
  require(an->shape[1] == bn->shape[0],
          "matmul: inner dimensions differ, " + shape_str(an->shape) + " x " +
              shape_str(bn->shape));
  const int m = an->shape[0], k = an->shape[1], nn = bn->shape[1];
  std::vector<T> out(static_cast<size_t>(m) * nn, T(0));
  detail::gemm_acc(an->value.data(), bn->value.data(), out.data(), m, k, nn);
  auto n = detail::make_node<T>({m, nn}, std::move(out), {an, bn}, "matmul");
  if (n->requires_grad) {
    n->backprop = [an, bn, m, k, nn](Node<T>& self) {
      if (an->requires_grad)
        detail::gemm_abt_acc(self.grad.data(), bn->value.data(), an->grad.data(), m, nn, k);
      if (bn->requires_grad)
        detail::gemm_atb_acc(an->value.data(), self.grad.data(), bn->grad.data(), k, m, nn);
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
  auto an = a.node();
  require(an && an->shape.size() == 2,
          "transpose2d: input must be 2-d, got " + shape_str(an ? an->shape : Shape{}));
  const int m = an->shape[0], nn = an->shape[1];
  std::vector<T> out(static_cast<size_t>(m) * nn);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < nn; ++j)
      out[static_cast<size_t>(j) * m + i] = an->value[static_cast<size_t>(i) * nn + j];
  auto n = detail::make_node<T>({nn, m}, std::move(out), {an}, "transpose2d");
  if (n->requires_grad) {
    n->backprop = [an, m, nn](Node<T>& self) {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < nn; ++j)
          an->grad[static_cast<size_t>(i) * nn + j] +=
              self.grad[static_cast<size_t>(j) * m + i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape target) {
  auto xn = x.node();
  require(xn != nullptr, "reshape: undefined input");
  require(shape_numel(target) == static_cast<int64_t>(xn->value.size()),
          "reshape: cannot view " + shape_str(xn->shape) + " as " + shape_str(target));
  auto n = detail::make_node<T>(std::move(target), xn->value, {xn}, "reshape");
  if (n->requires_grad) {
    n->backprop = [xn](Node<T>& self) {
      for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
    };
  }
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  auto an = a.node(), bn = b.node();
  require(an && bn, "add: undefined input");
  require(an->shape == bn->shape,
          "add: shape mismatch " + shape_str(an->shape) + " vs " + shape_str(bn->shape));
  std::vector<T> out(an->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] + bn->value[i];
  auto n = detail::make_node<T>(an->shape, std::move(out), {an, bn}, "add");
  if (n->requires_grad) {
    n->backprop = [an, bn](Node<T>& self) {
      if (an->requires_grad)
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
      if (bn->requires_grad)
        for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  auto an = a.node(), bn = b.node();
  require(an && bn, "mul: undefined input");
  require(an->shape == bn->shape,
          "mul: shape mismatch " + shape_str(an->shape) + " vs " + shape_str(bn->shape));
  std::vector<T> out(an->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] * bn->value[i];
  auto n = detail::make_node<T>(an->shape, std::move(out), {an, bn}, "mul");
  if (n->requires_grad) {
    n->backprop = [an, bn](Node<T>& self) {
      if (an->requires_grad)
        for (size_t i = 0; i < self.grad.size(); ++i)
          an->grad[i] += self.grad[i] * bn->value[i];
      if (bn->requires_grad)
        for (size_t i = 0; i < self.grad.size(); ++i)
          bn->grad[i] += self.grad[i] * an->value[i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, double c) {
  auto xn = x.node();
  require(xn != nullptr, "scale: undefined input");
  std::vector<T> out(xn->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = xn->value[i] * static_cast<T>(c);
  auto n = detail::make_node<T>(xn->shape, std::move(out), {xn}, "scale");
  if (n->requires_grad) {
    n->backprop = [xn, c](Node<T>& self) {
      for (size_t i = 0; i < self.grad.size(); ++i)
        xn->grad[i] += self.grad[i] * static_cast<T>(c);
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, double c) {
  auto xn = x.node();
  require(xn != nullptr, "add_scalar: undefined input");
  std::vector<T> out(xn->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = xn->value[i] + static_cast<T>(c);
  auto n = detail::make_node<T>(xn->shape, std::move(out), {xn}, "add_scalar");
  if (n->requires_grad) {
    n->backprop = [xn](Node<T>& self) {
      for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
    };
  }
  return Tensor<T>(n);
}

// out = s * x with a trainable scalar s of shape [1]; the one sanctioned
// scalar-tensor broadcast.
template <typename T>
Tensor<T> scalar_scale(const Tensor<T>& s, const Tensor<T>& x) {
  auto sn = s.node(), xn = x.node();
  require(sn && xn, "scalar_scale: undefined input");
  require(sn->value.size() == 1,
          "scalar_scale: scale must be scalar, got " + shape_str(sn->shape));
  T sv = sn->value[0];
  std::vector<T> out(xn->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = sv * xn->value[i];
  auto n = detail::make_node<T>(xn->shape, std::move(out), {sn, xn}, "scalar_scale");
  if (n->requires_grad) {
    n->backprop = [sn, xn, sv](Node<T>& self) {
      if (sn->requires_grad) {
        T acc = 0;
        for (size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * xn->value[i];
        sn->grad[0] += acc;
      }
      if (xn->requires_grad)
        for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] * sv;
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  auto xn = x.node();
  require(xn != nullptr, "relu: undefined input");
  std::vector<T> out(xn->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = xn->value[i] > T(0) ? xn->value[i] : T(0);
  if (KinkTrace::enabled())
    for (T v : xn->value) KinkTrace::events().push_back(v > T(0) ? 1 : 0);
  auto n = detail::make_node<T>(xn->shape, std::move(out), {xn}, "relu");
  if (n->requires_grad) {
    // subgradient at exactly 0 is taken as 0
    n->backprop = [xn](Node<T>& self) {
      for (size_t i = 0; i < self.grad.size(); ++i)
        if (xn->value[i] > T(0)) xn->grad[i] += self.grad[i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  auto xn = x.node();
  require(xn != nullptr, "sigmoid: undefined input");
  std::vector<T> out(xn->value.size());
  for (size_t i = 0; i < out.size(); ++i) {
    T v = xn->value[i];
    out[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                       : std::exp(v) / (T(1) + std::exp(v));
  }
  auto n = detail::make_node<T>(xn->shape, std::move(out), {xn}, "sigmoid");
  if (n->requires_grad) {
    // reads the forward result through `self`; capturing the node itself
    // would create a shared_ptr cycle and pin the whole graph
    n->backprop = [xn](Node<T>& self) {
      for (size_t i = 0; i < self.grad.size(); ++i) {
        T y = self.value[i];
        xn->grad[i] += self.grad[i] * y * (T(1) - y);
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  auto xn = x.node();
  require(xn != nullptr, "softmax: undefined input");
  const int nd = static_cast<int>(xn->shape.size());
  require(axis >= 0 && axis < nd,
          "softmax: axis " + std::to_string(axis) + " out of range for " +
              shape_str(xn->shape));
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= xn->shape[i];
  for (int i = axis + 1; i < nd; ++i) inner *= xn->shape[i];
  const int len = xn->shape[axis];
  std::vector<T> out(xn->value.size());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      T mx = xn->value[base];
      for (int l = 1; l < len; ++l) mx = std::max(mx, xn->value[base + l * inner]);
      T denom = 0;
      for (int l = 0; l < len; ++l) {
        T e = std::exp(xn->value[base + l * inner] - mx);
        out[base + l * inner] = e;
        denom += e;
      }
      for (int l = 0; l < len; ++l) out[base + l * inner] /= denom;
    }
  }
  auto n = detail::make_node<T>(xn->shape, std::move(out), {xn}, "softmax");
  if (n->requires_grad) {
    n->backprop = [xn, outer, inner, len](Node<T>& self) {
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = o * len * inner + in;
          T dot = 0;
          for (int l = 0; l < len; ++l)
            dot += self.grad[base + l * inner] * self.value[base + l * inner];
          for (int l = 0; l < len; ++l) {
            const int64_t idx = base + l * inner;
            xn->grad[idx] += self.value[idx] * (self.grad[idx] - dot);
          }
        }
      }
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  auto xn = x.node();
  require(xn != nullptr, "log: undefined input");
  std::vector<T> out(xn->value.size());
  for (size_t i = 0; i < out.size(); ++i) {
    require(xn->value[i] > T(0),
            "log: non-positive input " + std::to_string(xn->value[i]) + " at index " +
                std::to_string(i) + " (clamp first)");
    out[i] = std::log(xn->value[i]);
  }
  auto n = detail::make_node<T>(xn->shape, std::move(out), {xn}, "log");
  if (n->requires_grad) {
    n->backprop = [xn](Node<T>& self) {
      for (size_t i = 0; i < self.grad.size(); ++i)
        xn->grad[i] += self.grad[i] / xn->value[i];
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> clamp_min(const Tensor<T>& x, double floor) {
  auto xn = x.node();
  require(xn != nullptr, "clamp_min: undefined input");
  const T f = static_cast<T>(floor);
  std::vector<T> out(xn->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = xn->value[i] > f ? xn->value[i] : f;
  if (KinkTrace::enabled())
    for (T v : xn->value) KinkTrace::events().push_back(v > f ? 1 : 0);
  auto n = detail::make_node<T>(xn->shape, std::move(out), {xn}, "clamp_min");
  if (n->requires_grad) {
    n->backprop = [xn, f](Node<T>& self) {
      for (size_t i = 0; i < self.grad.size(); ++i)
        if (xn->value[i] > f) xn->grad[i] += self.grad[i];
    };
  }
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  auto xn = x.node();
  require(xn != nullptr, "sum: undefined input");
  T s = 0;
  for (T v : xn->value) s += v;
  auto n = detail::make_node<T>({1}, {s}, {xn}, "sum");
  if (n->requires_grad) {
    n->backprop = [xn](Node<T>& self) {
      T g = self.grad[0];
      for (size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += g;
    };
  }
  return Tensor<T>(n);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  auto xn = x.node();
  require(xn != nullptr, "mean: undefined input");
  T s = 0;
  for (T v : xn->value) s += v;
  const T inv = T(1) / static_cast<T>(xn->value.size());
  auto n = detail::make_node<T>({1}, {s * inv}, {xn}, "mean");
  if (n->requires_grad) {
    n->backprop = [xn, inv](Node<T>& self) {
      T g = self.grad[0] * inv;
      for (size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += g;
    };
  }
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// attention-specific primitives
// ---------------------------------------------------------------------------

// Divides every row of a non-negative matrix by its sum plus eps. Rows with
// zero mass come out all-zero.
template <typename T>
Tensor<T> row_normalize(const Tensor<T>& x, double eps = 1e-8) {
  auto xn = x.node();
  require(xn && xn->shape.size() == 2,
          "row_normalize: input must be 2-d, got " + shape_str(xn ? xn->shape : Shape{}));
  require(eps > 0, "row_normalize: eps must be positive");
  const int m = xn->shape[0], nn = xn->shape[1];
  std::vector<T> out(xn->value.size());
  auto denom = std::make_shared<std::vector<T>>(m);
  for (int i = 0; i < m; ++i) {
    const T* row = xn->value.data() + static_cast<size_t>(i) * nn;
    T s = 0;
    for (int j = 0; j < nn; ++j) {
      require(row[j] >= T(0), "row_normalize: negative entry at row " + std::to_string(i));
      s += row[j];
    }
    T d = s + static_cast<T>(eps);
    (*denom)[i] = d;
    T* orow = out.data() + static_cast<size_t>(i) * nn;
    for (int j = 0; j < nn; ++j) orow[j] = row[j] / d;
  }
  auto n = detail::make_node<T>(xn->shape, std::move(out), {xn}, "row_normalize");
  if (n->requires_grad) {
    n->backprop = [xn, denom, m, nn](Node<T>& self) {
      for (int i = 0; i < m; ++i) {
        const size_t off = static_cast<size_t>(i) * nn;
        T dot = 0;
        for (int j = 0; j < nn; ++j) dot += self.grad[off + j] * self.value[off + j];
        const T inv = T(1) / (*denom)[i];
        for (int j = 0; j < nn; ++j)
          xn->grad[off + j] += (self.grad[off + j] - dot) * inv;
      }
    };
  }
  return Tensor<T>(n);
}

// Zeroes every entry (i,j) whose binary labels differ: out_ij = x_ij * [b_i == b_j].
// The labels are a constant; no gradient flows through them.
template <typename T>
Tensor<T> pair_mask(const Tensor<T>& x, const std::vector<uint8_t>& b) {
  auto xn = x.node();
  require(xn && xn->shape.size() == 2 && xn->shape[0] == xn->shape[1],
          "pair_mask: input must be square [N,N], got " + shape_str(xn ? xn->shape : Shape{}));
  const int nn = xn->shape[0];
  require(static_cast<int>(b.size()) == nn,
          "pair_mask: mask length " + std::to_string(b.size()) + " does not match N=" +
              std::to_string(nn));
  for (uint8_t v : b)
    require(v == 0 || v == 1, "pair_mask: mask must be binary");
  auto bb = std::make_shared<std::vector<uint8_t>>(b);
  std::vector<T> out(xn->value.size());
  for (int i = 0; i < nn; ++i)
    for (int j = 0; j < nn; ++j) {
      size_t idx = static_cast<size_t>(i) * nn + j;
      out[idx] = (b[i] == b[j]) ? xn->value[idx] : T(0);
    }
  auto n = detail::make_node<T>(xn->shape, std::move(out), {xn}, "pair_mask");
  if (n->requires_grad) {
    n->backprop = [xn, bb, nn](Node<T>& self) {
      for (int i = 0; i < nn; ++i)
        for (int j = 0; j < nn; ++j) {
          size_t idx = static_cast<size_t>(i) * nn + j;
          if ((*bb)[i] == (*bb)[j]) xn->grad[idx] += self.grad[idx];
        }
    };
  }
  return Tensor<T>(n);
}

// ---------------------------------------------------------------------------
// name-based dispatch
// ---------------------------------------------------------------------------

struct PrimAttrs {
  int stride = 1;
  int pad = 0;
  int kernel = 2;
  int axis = 0;
  double scalar = 0.0;
  double eps = 1e-8;
  double floor = 0.0;
  Shape shape;                 // reshape target
  std::vector<uint8_t> mask;   // pair_mask labels
};

inline const std::vector<std::string>& primitive_names() {
  static const std::vector<std::string> names = {
      "conv2d",     "maxpool2d",  "global_avg_pool", "matmul",   "transpose2d",
      "reshape",    "add",        "mul",             "scale",    "add_scalar",
      "scalar_scale", "relu",     "sigmoid",         "softmax",  "log",
      "clamp_min",  "sum",        "mean",            "row_normalize", "pair_mask"};
  return names;
}

template <typename T>
Tensor<T> apply_primitive(const std::string& name, const std::vector<Tensor<T>>& in,
                          const PrimAttrs& a = {}) {
  auto arity = [&](size_t want) {
    require(in.size() == want, name + ": expected " + std::to_string(want) +
                                   " inputs, got " + std::to_string(in.size()));
  };
  if (name == "conv2d") {
    require(in.size() == 2 || in.size() == 3, "conv2d: expected 2 or 3 inputs");
    return in.size() == 2 ? conv2d(in[0], in[1], a.stride, a.pad)
                          : conv2d(in[0], in[1], in[2], a.stride, a.pad);
  }
  if (name == "maxpool2d") { arity(1); return maxpool2d(in[0], a.kernel, a.stride); }
  if (name == "global_avg_pool") { arity(1); return global_avg_pool(in[0]); }
  if (name == "matmul") { arity(2); return matmul(in[0], in[1]); }
  if (name == "transpose2d") { arity(1); return transpose2d(in[0]); }
  if (name == "reshape") { arity(1); return reshape(in[0], a.shape); }
  if (name == "add") { arity(2); return add(in[0], in[1]); }
  if (name == "mul") { arity(2); return mul(in[0], in[1]); }
  if (name == "scale") { arity(1); return scale(in[0], a.scalar); }
  if (name == "add_scalar") { arity(1); return add_scalar(in[0], a.scalar); }
  if (name == "scalar_scale") { arity(2); return scalar_scale(in[0], in[1]); }
  if (name == "relu") { arity(1); return relu(in[0]); }
  if (name == "sigmoid") { arity(1); return sigmoid(in[0]); }
  if (name == "softmax") { arity(1); return softmax(in[0], a.axis); }
  if (name == "log") { arity(1); return log(in[0]); }
  if (name == "clamp_min") { arity(1); return clamp_min(in[0], a.floor); }
  if (name == "sum") { arity(1); return sum(in[0]); }
  if (name == "mean") { arity(1); return mean(in[0]); }
  if (name == "row_normalize") { arity(1); return row_normalize(in[0], a.eps); }
  if (name == "pair_mask") { arity(1); return pair_mask(in[0], a.mask); }
  fail("apply_primitive: unknown primitive '" + name + "'");
}

}  // namespace sgan
