#pragma once
// Central finite-difference verification of reverse-mode gradients.
//
// Each coordinate is evaluated twice (x+eps, x-eps). Piecewise-linear ops
// (relu, clamp_min, maxpool2d) record their discrete decisions in KinkTrace;
// if the two perturbed evaluations disagree on any decision the coordinate
// sits within eps of a kink and is skipped rather than reported as a
// mismatch. Run in double precision.

#include <cmath>
#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "sgan/ops.hpp"
#include "sgan/tensor.hpp"

namespace sgan {

struct GradCheckResult {
  double max_rel_err = 0.0;   // over compared coordinates
  int checked = 0;            // coordinates compared
  int skipped = 0;            // coordinates excluded near kinks
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// f builds a scalar loss from a leaf tensor of the given shape. The analytic
// gradient comes from one reverse pass; the numeric side perturbs each
// coordinate of x in turn. Relative error uses max(1, |analytic|) as the
// denominator.
template <typename T>
GradCheckResult finite_diff_check(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                                  const std::vector<T>& x, const Shape& shape,
                                  double eps) {
  static_assert(std::is_floating_point_v<T>);
  require(eps >= 1e-6 && eps <= 1e-4,
          "finite_diff_check: eps " + std::to_string(eps) + " outside [1e-6, 1e-4]");
  require(static_cast<int64_t>(x.size()) == shape_numel(shape),
          "finite_diff_check: data size " + std::to_string(x.size()) +
              " does not match shape " + shape_str(shape));

  Tensor<T> leaf = Tensor<T>::from_data(shape, x, /*requires_grad=*/true);
  Tensor<T> loss = f(leaf);
  require(loss.defined() && loss.numel() == 1,
          "finite_diff_check: f must return a scalar, got shape " +
              (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  backward(loss);
  const std::vector<T> analytic = leaf.grad();

  GradCheckResult r;
  NoGrad ng;  // numeric evaluations never need the tape
  std::vector<T> xp = x;
  for (size_t i = 0; i < xp.size(); ++i) {
    const T orig = xp[i];

    KinkTrace::enabled() = true;
    KinkTrace::clear();
    xp[i] = orig + static_cast<T>(eps);
    const double fp = static_cast<double>(f(Tensor<T>::from_data(shape, xp)).item());
    std::vector<int64_t> trace_p = KinkTrace::events();

    KinkTrace::clear();
    xp[i] = orig - static_cast<T>(eps);
    const double fm = static_cast<double>(f(Tensor<T>::from_data(shape, xp)).item());
    std::vector<int64_t> trace_m = std::move(KinkTrace::events());
    KinkTrace::enabled() = false;
    KinkTrace::clear();
    xp[i] = orig;

    if (std::isnan(fp) || std::isnan(fm))
      fail("finite_diff_check: NaN encountered at coordinate " + std::to_string(i));
    if (trace_p != trace_m) {
      ++r.skipped;
      continue;
    }

    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = static_cast<double>(analytic[i]);
    const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
    ++r.checked;
    if (rel >= r.max_rel_err) {
      r.max_rel_err = rel;
      r.worst_index = static_cast<int>(i);
      r.worst_analytic = a;
      r.worst_numeric = numeric;
    }
  }
  return r;
}

}  // namespace sgan
