#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cesynth/tensor.hpp"

namespace cesynth::nn {

// Reverse-mode autodiff over a dynamically recorded graph. Each Node owns its
// forward value and, once backward() reaches it, its gradient.
template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  /// Gradient buffer, zero-initialised to the value's shape on first use.
  Tensor<T>& grad_buffer() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool has_grad() const { return !grad.empty() && grad.shape() == value.shape(); }
  const Shape& shape() const { return value.shape(); }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

template <class T>
Var<T> constant(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  return node;
}

template <class T>
Var<T> parameter(Tensor<T> value) {
  auto node = constant(std::move(value));
  node->requires_grad = true;
  return node;
}

/// False inside a NoGradGuard scope; results are then recorded as constants.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Wraps a computed value, wiring it into the graph if any input needs a gradient.
template <class T>
Var<T> record(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (!grad_enabled()) return node;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in->requires_grad;
  if (needs) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward_fn = std::move(backward_fn);
  }
  return node;
}

/// Backpropagates from a scalar root (seed gradient 1), accumulating into
/// every reachable leaf that requires a gradient. Interior gradients are
/// released once propagated, so the same graph can be swept from a second
/// root. Nothing flows through or past the nodes in `blocked`.
template <class T>
void backward(const Var<T>& root, const std::vector<Var<T>>& blocked = {});

/// Copy of x with no history.
template <class T>
Var<T> detach(const Var<T>& x) {
  return constant(x->value);
}

}  // namespace cesynth::nn
