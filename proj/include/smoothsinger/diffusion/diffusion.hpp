#pragma once

#include <functional>
#include <string>
#include <vector>

#include "smoothsinger/numerics/autograd.hpp"
#include "smoothsinger/random.hpp"

namespace smoothsinger::diffusion {

using numerics::Shape;
using numerics::Tensor;
using numerics::Var;

// Steps are 1-based: beta(1) .. beta(T). alpha_bar(0) is 1.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  // Each beta must lie in (0, 1).
  explicit NoiseSchedule(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_.at(index(t)); }
  double alpha(int t) const { return alphas_.at(index(t)); }
  double alpha_bar(int t) const;
  // Variance of q(x_{t-1} | x_t, x_0).
  double posterior_variance(int t) const;

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

 private:
  std::size_t index(int t) const;

  std::vector<double> betas_, alphas_, alpha_bars_;
};

NoiseSchedule make_linear_schedule(int steps, double beta_min, double beta_max);

// Upper beta bound of the default linear schedule: 0.05 at 100 steps, scaled
// by 100/T so shorter schedules still end near pure noise.
double default_beta_max(int steps);
NoiseSchedule make_default_linear_schedule(int steps);

std::vector<double> default_short_betas();
NoiseSchedule make_short_schedule(const std::vector<double>& betas = default_short_betas());

// Continuous training-step positions with the same noise level as each
// inference step, found by interpolating sqrt(alpha_bar) of the training
// schedule. Clamped to [1, T_train].
std::vector<double> align_steps(const NoiseSchedule& inference, const NoiseSchedule& training);

// sqrt(1 - beta) x + sqrt(beta) eps for any beta in [0, 1].
Tensor forward_transition(const Tensor& x_prev, double beta, Rng& rng);
Tensor forward_step(const Tensor& x_prev, int t, const NoiseSchedule& schedule, Rng& rng);
// Closed-form x_t; t = 0 returns x0.
Tensor forward_marginal(const Tensor& x0, int t, const Tensor& epsilon, const NoiseSchedule& schedule);

// Mean of p(x_{t-1} | x_t) under the epsilon parameterisation.
Tensor reverse_mean(const Tensor& predicted_noise, const Tensor& x_t, int t, const NoiseSchedule& schedule);
// Adds posterior-variance noise for t > 1; at t = 1 returns the mean and draws nothing.
Tensor reverse_step(const Tensor& predicted_noise, const Tensor& x_t, int t, const NoiseSchedule& schedule,
                    Rng& rng);

// Predicts epsilon from x_t at a (possibly fractional) training step. Any
// reference or conditioning is bound into the callable.
using NoisePredictor = std::function<Var(const Tensor& x_t, double step)>;

struct LossDraw {
  int t = 1;
  Tensor epsilon;
};

// t uniform on [1, T], then epsilon ~ N(0, I) element by element.
LossDraw draw_training_noise(const Shape& shape, const NoiseSchedule& schedule, Rng& rng);

// Mean squared error between the prediction at forward_marginal(x0, t, eps) and eps.
Var training_loss(const NoisePredictor& model, const Tensor& x0, const LossDraw& draw, const NoiseSchedule& schedule);
Var training_loss(const NoisePredictor& model, const Tensor& x0, const NoiseSchedule& schedule, Rng& rng);

// Starts from x_T ~ N(0, I) and applies reverse_step T times. model_steps maps
// inference step t to the step passed to the model (index t - 1); empty means
// t itself. Throws RuntimeError naming the step if the model output or the
// iterate stops being finite.
Tensor sample(const NoisePredictor& model, const Shape& shape, const NoiseSchedule& schedule, Rng& rng,
              const std::vector<double>& model_steps = {});

struct Gaussian1d {
  double mean = 0.0;
  double variance = 1.0;
};

// KL(q || p) for univariate Gaussians.
double gaussian_kl(const Gaussian1d& q, const Gaussian1d& p);

struct VlbTerms {
  double prior = 0.0;               // KL(q(x_T | x_0) || N(0, 1))
  std::vector<double> transitions;  // KL(q(x_{t-1} | x_t, x_0) || p(x_{t-1} | x_t)) for t = 2..T
  double total() const;
};

// Per-step KL terms on a scalar problem: x_t = forward_marginal(x0, t, epsilon[t - 1])
// and the model predicts epsilon from (x_t, t).
VlbTerms vlb_oracle(double x0, const std::vector<double>& epsilon,
                    const std::function<double(double x_t, int t)>& predict, const NoiseSchedule& schedule);

// Tab-separated t, beta, alpha, alpha_bar with a header row.
std::string schedule_table(const NoiseSchedule& schedule);

}  // namespace smoothsinger::diffusion
