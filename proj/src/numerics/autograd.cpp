#include "smoothsinger/numerics/autograd.hpp"

#include <unordered_set>

#include "smoothsinger/errors.hpp"

namespace smoothsinger::numerics {

namespace {
thread_local bool tls_grad_enabled = true;
}

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape());
  return grad;
}

NoGradGuard::NoGradGuard() : previous_(tls_grad_enabled) { tls_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { tls_grad_enabled = previous_; }

bool grad_enabled() { return tls_grad_enabled; }

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var input(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = tls_grad_enabled;
  return Var(std::move(node));
}

Var param(Parameter& p) {
  auto node = std::make_shared<Node>();
  node->value = p.value;
  if (tls_grad_enabled) {
    node->requires_grad = true;
    node->parameter = &p;
  }
  return Var(std::move(node));
}

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (tls_grad_enabled)
    for (const auto& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.ptr());
    node->backward = std::move(backward_fn);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss) throw ValidationError("backward: empty loss");
  if (loss.value().size() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{&loss.node(), 0}};
  visited.insert(&loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node().grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->grad.empty()) continue;
    if (node->backward) node->backward(*node);
    if (node->parameter) {
      Tensor& target = node->parameter->grad;
      if (target.shape() != node->grad.shape()) target = Tensor(node->grad.shape());
      for (std::size_t i = 0; i < target.size(); ++i) target[i] += node->grad[i];
    }
  }
}

}  // namespace smoothsinger::numerics
