#pragma once
// SGD with classical momentum and decoupled-from-nothing L2 weight decay
// folded into the gradient:
//   v <- mu * v + (g + wd * theta);  theta <- theta - lr * v
//
// Gradients accumulate across the samples of a batch (callers scale each
// sample loss by 1/batch before backward), so step() consumes whatever is in
// the leaves and zero_grad() starts the next batch.

#include <vector>

#include "sgan/checkpoint.hpp"
#include "sgan/tensor.hpp"

namespace sgan {

template <typename T = float>
class SgdOptimizer {
 public:
  SgdOptimizer(NamedTensors<T> params, double lr, double momentum = 0.9,
               double weight_decay = 5e-4)
      : params_(std::move(params)), lr_(lr), mu_(momentum), wd_(weight_decay) {
    require(lr > 0, "sgd: learning rate must be > 0");
    require(momentum >= 0 && momentum < 1, "sgd: momentum must be in [0,1)");
    require(weight_decay >= 0, "sgd: weight decay must be >= 0");
    for (auto& [name, t] : params_.items) {
      require(t.requires_grad(), "sgd: parameter '" + name + "' does not track gradients");
      velocity_.emplace_back(t.numel(), T(0));
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) {
    require(lr > 0, "sgd: learning rate must be > 0");
    lr_ = lr;
  }

  void zero_grad() {
    for (auto& [name, t] : params_.items) t.zero_grad();
  }

  void step() {
    for (size_t p = 0; p < params_.items.size(); ++p) {
      auto& node = *params_.items[p].second.node();
      auto& v = velocity_[p];
      for (size_t i = 0; i < v.size(); ++i) {
        v[i] = static_cast<T>(mu_) * v[i] +
               (node.grad[i] + static_cast<T>(wd_) * node.value[i]);
        node.value[i] -= static_cast<T>(lr_) * v[i];
      }
    }
  }

 private:
  NamedTensors<T> params_;
  double lr_, mu_, wd_;
  std::vector<std::vector<T>> velocity_;
};

// Step-decay schedule: multiply the base rate by `factor` once past each
// milestone (fractions of total_steps).
inline double scheduled_lr(double base_lr, double factor, int step, int total_steps,
                           double m1 = 0.5, double m2 = 0.75) {
  double lr = base_lr;
  if (step >= static_cast<int>(total_steps * m1)) lr *= factor;
  if (step >= static_cast<int>(total_steps * m2)) lr *= factor;
  return lr;
}

}  // namespace sgan
