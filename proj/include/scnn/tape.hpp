#pragma once

// Minimal reverse-mode tape. Each node owns its forward value and gradient;
// backward closures run in reverse recording order and accumulate into the
// gradients of their inputs (and of registered parameters).

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "scnn/core.hpp"

namespace scnn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

// Named parameter or buffer tensor. Buffers (trainable = false) hold state
// such as batch-norm running statistics and receive no gradient.
template <class T>
struct Tensor {
  std::string name;
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;
  bool trainable = true;

  std::size_t size() const { return values.size(); }
  void zero_grad() { grad.assign(values.size(), T(0)); }
};

template <class T>
class Tape {
public:
  struct Var {
    int id = -1;
  };

  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::function<void()> backward;
  };

  Var leaf(Shape shape, std::vector<T> value) {
    if (shape_size(shape) != value.size()) throw InternalError("tape: leaf value does not match shape " + shape_string(shape));
    nodes_.push_back(Node{std::move(shape), std::move(value), {}, {}});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  // Value copied from the tensor; gradient flows back into tensor.grad.
  Var parameter(Tensor<T>& p) {
    Var v = leaf(p.shape, p.values);
    if (p.trainable) {
      if (p.grad.size() != p.values.size()) p.zero_grad();
      Tensor<T>* target = &p;
      set_backward(v, [this, v, target] {
        const auto& g = node(v).grad;
        for (std::size_t i = 0; i < g.size(); ++i) target->grad[i] += g[i];
      });
    }
    return v;
  }

  // Node whose backward closure is attached later via set_backward.
  Var output(Shape shape, std::vector<T> value) { return leaf(std::move(shape), std::move(value)); }

  void set_backward(Var v, std::function<void()> fn) { node(v).backward = std::move(fn); }

  Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
  const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }
  const std::vector<T>& value(Var v) const { return node(v).value; }
  const Shape& shape(Var v) const { return node(v).shape; }

  // Gradient buffer of v, allocated on first use.
  std::vector<T>& grad(Var v) {
    Node& n = node(v);
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), T(0));
    return n.grad;
  }

  // Seeds d(root)/d(root) = 1 on a scalar root and replays the closures.
  void backward(Var root) {
    if (node(root).value.size() != 1) throw InternalError("tape: backward root must be a scalar");
    for (auto& n : nodes_) n.grad.assign(n.value.size(), T(0));
    grad(root)[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
      if (it->backward) it->backward();
  }

  std::size_t size() const { return nodes_.size(); }

private:
  std::vector<Node> nodes_;
};

}  // namespace scnn
