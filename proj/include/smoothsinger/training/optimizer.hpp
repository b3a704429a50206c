#pragma once

#include <cstdint>
#include <vector>

#include "smoothsinger/numerics/autograd.hpp"

namespace smoothsinger::training {

using numerics::Parameter;
using numerics::Tensor;

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adaptive moments with decoupled weight decay:
//   p <- p - lr * wd * p
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::vector<Parameter*> params, AdamWConfig config = {});

  void step(double lr);
  void zero_grad();

  const AdamWConfig& config() const { return config_; }
  const std::vector<Parameter*>& parameters() const { return params_; }
  std::uint64_t updates() const { return updates_; }

  // Moment buffers in parameter order, exposed for checkpointing.
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_updates(std::uint64_t n) { updates_ = n; }

 private:
  AdamWConfig config_;
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;
  std::uint64_t updates_ = 0;
};

// lr_start * (lr_end / lr_start)^(step / (total_steps - 1)) for step in
// [0, total_steps); a single-step run uses lr_start.
double log_linear_lr(std::int64_t step, std::int64_t total_steps, double lr_start, double lr_end);

}  // namespace smoothsinger::training
