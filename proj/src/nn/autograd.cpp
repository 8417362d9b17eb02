#include "cesynth/nn/autograd.hpp"

#include <unordered_set>

namespace cesynth::nn {
namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <class T>
void backward(const Var<T>& root, const std::vector<Var<T>>& blocked) {
  if (root->value.size() != 1) {
    throw UsageError("backward() needs a scalar root, got shape " + shape_str(root->shape()));
  }
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order without recursion depth limits.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  for (const auto& b : blocked) visited.insert(b.get());
  if (visited.count(root.get())) return;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (!node->backward_fn) continue;
    if (node->has_grad()) node->backward_fn(*node);
    node->grad = Tensor<T>();
  }
  for (const auto& b : blocked) {
    if (b->backward_fn) b->grad = Tensor<T>();
  }
}

template void backward<float>(const Var<float>&, const std::vector<Var<float>>&);
template void backward<double>(const Var<double>&, const std::vector<Var<double>>&);

}  // namespace cesynth::nn
