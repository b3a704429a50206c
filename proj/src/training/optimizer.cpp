#include "smoothsinger/training/optimizer.hpp"

#include <cmath>

#include "smoothsinger/errors.hpp"

namespace smoothsinger::training {

AdamW::AdamW(std::vector<Parameter*> params, AdamWConfig config) : config_(config), params_(std::move(params)) {
  if (!(config_.beta1 >= 0 && config_.beta1 < 1) || !(config_.beta2 >= 0 && config_.beta2 < 1))
    throw ConfigError("adamw: betas must lie in [0, 1)");
  if (!(config_.eps > 0)) throw ConfigError("adamw: eps must be positive");
  if (!(config_.weight_decay >= 0)) throw ConfigError("adamw: weight_decay must be >= 0");
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void AdamW::step(double lr) {
  ++updates_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(updates_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(updates_));
  const double decay = 1.0 - lr * config_.weight_decay;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    auto& m = m_[k];
    auto& v = v_[k];
    const bool has_grad = p.grad.size() == p.value.size();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = has_grad ? p.grad[i] : 0.0;
      m[i] = b1 * m[i] + (1 - b1) * g;
      v[i] = b2 * v[i] + (1 - b2) * g * g;
      p.value[i] *= decay;
      p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

double log_linear_lr(std::int64_t step, std::int64_t total_steps, double lr_start, double lr_end) {
  if (total_steps < 1 || step < 0 || step >= total_steps)
    throw ValidationError("lr schedule: step " + std::to_string(step) + " outside [0, " +
                          std::to_string(total_steps) + ")");
  if (!(lr_start > 0) || !(lr_end > 0)) throw ConfigError("lr schedule: rates must be positive");
  if (total_steps == 1) return lr_start;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return lr_start * std::pow(lr_end / lr_start, frac);
}

}  // namespace smoothsinger::training
