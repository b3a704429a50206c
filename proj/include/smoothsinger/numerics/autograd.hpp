#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "smoothsinger/numerics/tensor.hpp"

namespace smoothsinger::numerics {

// A named trainable array together with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor(value.shape()); }
};

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  Parameter* parameter = nullptr;

  // Gradient buffer, zero-filled on first use.
  Tensor& grad_buffer();
};

// Handle to one value in a dynamically recorded computation.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_->requires_grad; }
  // Gradient after backward(); zero-shaped when the value took no part.
  const Tensor& grad() const { return node_->grad; }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Var constant(Tensor value);
// Differentiable input that is not a parameter (used by gradient checks).
Var input(Tensor value);
Var param(Parameter& p);

// Builds a result node. `backward` receives the finished node and must push
// its gradient into the parents; it is dropped when no parent needs a gradient.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

// Reverse-mode sweep from a scalar. Parameter gradients are accumulated into
// Parameter::grad, so callers zero them between steps.
void backward(const Var& loss);

}  // namespace smoothsinger::numerics
