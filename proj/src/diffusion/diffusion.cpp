#include "smoothsinger/diffusion/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "smoothsinger/errors.hpp"
#include "smoothsinger/numerics/ops.hpp"

namespace smoothsinger::diffusion {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw ConfigError("noise schedule needs at least one step");
  double bar = 1.0;
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    const double b = betas_[i];
    if (!(b > 0.0 && b < 1.0))
      throw ConfigError("beta_" + std::to_string(i + 1) + " = " + std::to_string(b) + " outside (0, 1)");
    alphas_.push_back(1.0 - b);
    bar *= 1.0 - b;
    alpha_bars_.push_back(bar);
  }
}

std::size_t NoiseSchedule::index(int t) const {
  if (t < 1 || t > steps())
    throw ValidationError("step " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
  return static_cast<std::size_t>(t - 1);
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  return alpha_bars_.at(index(t));
}

double NoiseSchedule::posterior_variance(int t) const {
  return (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t)) * beta(t);
}

NoiseSchedule make_linear_schedule(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw ConfigError("schedule step count must be >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
    throw ConfigError("linear schedule needs 0 < beta_min <= beta_max < 1");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i)
    betas[static_cast<std::size_t>(i)] =
        steps == 1 ? beta_min : beta_min + (beta_max - beta_min) * static_cast<double>(i) / (steps - 1);
  return NoiseSchedule(std::move(betas));
}

double default_beta_max(int steps) {
  if (steps < 1) throw ConfigError("schedule step count must be >= 1");
  return std::min(0.5, 0.05 * 100.0 / steps);
}

NoiseSchedule make_default_linear_schedule(int steps) {
  return make_linear_schedule(steps, std::min(1e-4, default_beta_max(steps)), default_beta_max(steps));
}

std::vector<double> default_short_betas() {
  std::vector<double> betas(4);
  for (int i = 0; i < 4; ++i) betas[static_cast<std::size_t>(i)] = 1e-4 * std::pow(0.5 / 1e-4, i / 3.0);
  return betas;
}

NoiseSchedule make_short_schedule(const std::vector<double>& betas) { return NoiseSchedule(betas); }

std::vector<double> align_steps(const NoiseSchedule& inference, const NoiseSchedule& training) {
  std::vector<double> out;
  const int n = training.steps();
  for (int s = 1; s <= inference.steps(); ++s) {
    const double target = std::sqrt(inference.alpha_bar(s));
    double step = n;
    if (target >= std::sqrt(training.alpha_bar(1))) {
      step = 1.0;
    } else {
      for (int t = 1; t < n; ++t) {
        const double hi = std::sqrt(training.alpha_bar(t)), lo = std::sqrt(training.alpha_bar(t + 1));
        if (target <= hi && target >= lo) {
          step = t + (hi - target) / (hi - lo);
          break;
        }
      }
    }
    out.push_back(step);
  }
  return out;
}

Tensor forward_transition(const Tensor& x_prev, double beta, Rng& rng) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("forward transition beta outside [0, 1]");
  const double keep = std::sqrt(1.0 - beta), spread = std::sqrt(beta);
  Tensor out(x_prev.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep * x_prev[i] + spread * standard_normal(rng);
  return out;
}

Tensor forward_step(const Tensor& x_prev, int t, const NoiseSchedule& schedule, Rng& rng) {
  return forward_transition(x_prev, schedule.beta(t), rng);
}

Tensor forward_marginal(const Tensor& x0, int t, const Tensor& epsilon, const NoiseSchedule& schedule) {
  if (epsilon.shape() != x0.shape())
    throw ShapeError("epsilon shape " + numerics::to_string(epsilon.shape()) + " does not match x0 " +
                     numerics::to_string(x0.shape()));
  if (t < 0 || t > schedule.steps()) throw ValidationError("step " + std::to_string(t) + " outside schedule");
  if (t == 0) return x0;
  const double a = std::sqrt(schedule.alpha_bar(t)), s = std::sqrt(1.0 - schedule.alpha_bar(t));
  Tensor out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + s * epsilon[i];
  return out;
}

Tensor reverse_mean(const Tensor& predicted_noise, const Tensor& x_t, int t, const NoiseSchedule& schedule) {
  if (predicted_noise.shape() != x_t.shape())
    throw ShapeError("predicted noise shape " + numerics::to_string(predicted_noise.shape()) +
                     " does not match x_t " + numerics::to_string(x_t.shape()));
  const double coef = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double inv = 1.0 / std::sqrt(schedule.alpha(t));
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = inv * (x_t[i] - coef * predicted_noise[i]);
  return out;
}

Tensor reverse_step(const Tensor& predicted_noise, const Tensor& x_t, int t, const NoiseSchedule& schedule,
                    Rng& rng) {
  Tensor out = reverse_mean(predicted_noise, x_t, t, schedule);
  if (t > 1) {
    const double sigma = std::sqrt(schedule.posterior_variance(t));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * standard_normal(rng);
  }
  return out;
}

LossDraw draw_training_noise(const Shape& shape, const NoiseSchedule& schedule, Rng& rng) {
  LossDraw draw;
  draw.t = static_cast<int>(uniform_int(rng, 1, schedule.steps()));
  draw.epsilon = Tensor(shape);
  for (std::size_t i = 0; i < draw.epsilon.size(); ++i) draw.epsilon[i] = standard_normal(rng);
  return draw;
}

Var training_loss(const NoisePredictor& model, const Tensor& x0, const LossDraw& draw, const NoiseSchedule& schedule) {
  const Tensor x_t = forward_marginal(x0, draw.t, draw.epsilon, schedule);
  Var prediction = model(x_t, static_cast<double>(draw.t));
  if (prediction.shape() != x0.shape())
    throw ShapeError("model output " + numerics::to_string(prediction.shape()) + " does not match target " +
                     numerics::to_string(x0.shape()));
  return numerics::mean_squared_error(prediction, numerics::constant(draw.epsilon));
}

Var training_loss(const NoisePredictor& model, const Tensor& x0, const NoiseSchedule& schedule, Rng& rng) {
  return training_loss(model, x0, draw_training_noise(x0.shape(), schedule, rng), schedule);
}

Tensor sample(const NoisePredictor& model, const Shape& shape, const NoiseSchedule& schedule, Rng& rng,
              const std::vector<double>& model_steps) {
  if (!model_steps.empty() && model_steps.size() != static_cast<std::size_t>(schedule.steps()))
    throw ValidationError("model step map has " + std::to_string(model_steps.size()) + " entries for " +
                          std::to_string(schedule.steps()) + " steps");
  numerics::NoGradGuard no_grad;
  Tensor x(shape);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = standard_normal(rng);
  for (int t = schedule.steps(); t >= 1; --t) {
    const double step = model_steps.empty() ? t : model_steps[static_cast<std::size_t>(t - 1)];
    const Tensor eps = model(x, step).value();
    if (!eps.all_finite()) throw RuntimeError("non-finite model output at sampling step " + std::to_string(t));
    x = reverse_step(eps, x, t, schedule, rng);
    if (!x.all_finite()) throw RuntimeError("non-finite sample at step " + std::to_string(t));
  }
  return x;
}

double gaussian_kl(const Gaussian1d& q, const Gaussian1d& p) {
  if (!(q.variance > 0.0 && p.variance > 0.0) || !std::isfinite(q.mean) || !std::isfinite(p.mean) ||
      !std::isfinite(q.variance) || !std::isfinite(p.variance))
    throw ConfigError("Gaussian KL needs finite means and positive finite variances");
  const double d = q.mean - p.mean;
  return 0.5 * (q.variance / p.variance + d * d / p.variance - 1.0 + std::log(p.variance / q.variance));
}

double VlbTerms::total() const {
  double s = prior;
  for (double v : transitions) s += v;
  return s;
}

VlbTerms vlb_oracle(double x0, const std::vector<double>& epsilon,
                    const std::function<double(double x_t, int t)>& predict, const NoiseSchedule& schedule) {
  const int n = schedule.steps();
  if (epsilon.size() != static_cast<std::size_t>(n))
    throw ConfigError("vlb oracle needs one epsilon per step");
  VlbTerms terms;
  const double bar_n = schedule.alpha_bar(n);
  terms.prior = gaussian_kl({std::sqrt(bar_n) * x0, 1.0 - bar_n}, {0.0, 1.0});
  for (int t = 2; t <= n; ++t) {
    const double bar = schedule.alpha_bar(t), bar_prev = schedule.alpha_bar(t - 1);
    const double x_t = std::sqrt(bar) * x0 + std::sqrt(1.0 - bar) * epsilon[static_cast<std::size_t>(t - 1)];
    const double var = schedule.posterior_variance(t);
    const double q_mean = std::sqrt(bar_prev) * schedule.beta(t) / (1.0 - bar) * x0 +
                          std::sqrt(schedule.alpha(t)) * (1.0 - bar_prev) / (1.0 - bar) * x_t;
    const double p_mean =
        (x_t - schedule.beta(t) / std::sqrt(1.0 - bar) * predict(x_t, t)) / std::sqrt(schedule.alpha(t));
    terms.transitions.push_back(gaussian_kl({q_mean, var}, {p_mean, var}));
  }
  return terms;
}

std::string schedule_table(const NoiseSchedule& schedule) {
  std::string out = "t\tbeta\talpha\talpha_bar\n";
  char buf[128];
  for (int t = 1; t <= schedule.steps(); ++t) {
    std::snprintf(buf, sizeof buf, "%d\t%.17g\t%.17g\t%.17g\n", t, schedule.beta(t), schedule.alpha(t),
                  schedule.alpha_bar(t));
    out += buf;
  }
  return out;
}

}  // namespace smoothsinger::diffusion
