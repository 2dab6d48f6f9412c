#pragma once
// Dense row-major n-dimensional tensors with reverse-mode automatic
// differentiation. A Tensor is a handle to a graph node; applying a primitive
// while gradient recording is on links the result to its inputs, and
// backward() walks the recorded graph once in reverse topological order.
//
// Tensors are immutable values after creation, except for gradient
// accumulation and explicit leaf updates between optimizer steps.

#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace sgan {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

template <typename T>
constexpr const char* dtype_name() {
  if constexpr (sizeof(T) == 4) return "f32";
  return "f64";
}

// Gradient recording is a thread-local mode; inference paths switch it off.
inline bool& grad_mode() {
  thread_local bool on = true;
  return on;
}

struct NoGrad {
  bool prev;
  NoGrad() : prev(grad_mode()) { grad_mode() = false; }
  ~NoGrad() { grad_mode() = prev; }
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated iff requires_grad; always matches value size
  bool requires_grad = false;
  bool leaf = false;
  bool backward_done = false;  // set on a node once used as a backward() root
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backprop;  // pulls this->grad into parents
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> n) : n_(std::move(n)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return from_data(shape, std::vector<T>(shape_numel(shape), T(0)), requires_grad);
  }

  static Tensor full(Shape shape, T v, bool requires_grad = false) {
    return from_data(shape, std::vector<T>(shape_numel(shape), v), requires_grad);
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from_data({1}, {v}, requires_grad);
  }

  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
    for (int d : shape)
      require(d > 0, "tensor: extents must be positive, got " + shape_str(shape));
    require(shape_numel(shape) == static_cast<int64_t>(data.size()),
            "tensor: shape " + shape_str(shape) + " does not match data length " +
                std::to_string(data.size()));
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->leaf = true;
    if (requires_grad) {
      n->requires_grad = true;
      n->grad.assign(n->value.size(), T(0));
    }
    return Tensor(std::move(n));
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int64_t numel() const { return static_cast<int64_t>(n_->value.size()); }
  int dim(int i) const { return n_->shape[i]; }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  bool is_leaf() const { return n_ && n_->leaf; }

  std::vector<T>& data() { return n_->value; }
  const std::vector<T>& data() const { return n_->value; }
  const std::vector<T>& grad() const {
    require(n_->requires_grad, "tensor: grad requested on a non-tracked tensor");
    return n_->grad;
  }

  T item() const {
    require(numel() == 1, "tensor: item() on non-scalar shape " + shape_str(n_->shape));
    return n_->value[0];
  }

  void zero_grad() {
    if (n_ && n_->requires_grad) n_->grad.assign(n_->value.size(), T(0));
  }

  std::shared_ptr<Node<T>> node() const { return n_; }

 private:
  std::shared_ptr<Node<T>> n_;
};

// Reverse-mode sweep from a scalar loss. Each reachable gradient-tracked node
// is visited exactly once; leaf gradients accumulate additively, so calling
// backward on several per-sample losses sums their contributions.
template <typename T>
inline void backward(const Tensor<T>& loss) {
  auto root = loss.node();
  require(root != nullptr, "backward: undefined tensor");
  require(root->value.size() == 1,
          "backward: loss must be scalar, got shape " + shape_str(root->shape));
  require(root->requires_grad,
          "backward: loss does not depend on any gradient-tracked leaf");
  if (root->backward_done)
    throw std::runtime_error("backward: called twice on the same graph without reset");
  root->backward_done = true;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  struct Frame {
    Node<T>* n;
    size_t next;
  };
  std::vector<Frame> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node<T>* p = f.n->parents[f.next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  root->grad.assign(root->value.size(), T(0));
  root->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

}  // namespace sgan
