#include "smoothsinger/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "smoothsinger/errors.hpp"

namespace smoothsinger::numerics {

namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3))
    throw ConfigError("finite_difference_check: epsilon " + std::to_string(epsilon) + " outside [1e-7, 1e-3]");
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

double scalar_value(const Var& v, const std::string& where) {
  if (v.value().size() != 1) throw ShapeError("finite_difference_check: function must return a scalar");
  const double x = v.value()[0];
  if (!std::isfinite(x)) throw RuntimeError("finite_difference_check: non-finite value at " + where);
  return x;
}

void record(GradientCheckReport& report, double analytic, double numeric, std::string where) {
  if (!std::isfinite(analytic)) throw RuntimeError("finite_difference_check: non-finite gradient at " + where);
  ++report.coordinates_checked;
  const double err = relative_error(analytic, numeric);
  if (err >= report.max_relative_error) {
    report.max_relative_error = err;
    report.worst_location = std::move(where);
    report.analytic = analytic;
    report.numeric = numeric;
  }
}

// f(offset) evaluates the function with the coordinate moved by offset and
// restores nothing; the caller resets the coordinate afterwards.
template <typename F>
double numeric_derivative(F&& f, double h, Stencil stencil) {
  if (stencil == Stencil::Central) return (f(h) - f(-h)) / (2.0 * h);
  // Symmetric differences first: exact zero for a flat direction.
  const double near = f(h) - f(-h);
  const double far = f(2 * h) - f(-2 * h);
  return (8.0 * near - far) / (12.0 * h);
}

}  // namespace

GradientCheckReport finite_difference_check(const std::function<Var(const std::vector<Var>&)>& fn,
                                            const std::vector<Tensor>& point, double epsilon, Stencil stencil) {
  check_epsilon(epsilon);
  std::vector<Var> inputs;
  for (const auto& t : point) inputs.push_back(input(t));
  Var out = fn(inputs);
  scalar_value(out, "base point");
  backward(out);

  GradientCheckReport report;
  NoGradGuard no_grad;
  std::vector<Tensor> probe = point;
  auto evaluate = [&](const std::string& where) {
    std::vector<Var> vars;
    for (const auto& t : probe) vars.push_back(constant(t));
    return scalar_value(fn(vars), where);
  };
  for (std::size_t a = 0; a < probe.size(); ++a) {
    for (std::size_t i = 0; i < probe[a].size(); ++i) {
      const std::string where = "input" + std::to_string(a) + "[" + std::to_string(i) + "]";
      const double saved = probe[a][i];
      const double numeric = numeric_derivative(
          [&](double d) {
            probe[a][i] = saved + d;
            return evaluate(where);
          },
          epsilon, stencil);
      probe[a][i] = saved;
      const double analytic = inputs[a].grad().empty() ? 0.0 : inputs[a].grad()[i];
      record(report, analytic, numeric, where);
    }
  }
  return report;
}

GradientCheckReport finite_difference_check(const std::function<Var()>& loss, std::span<Parameter* const> params,
                                            double epsilon, std::size_t stride, Stencil stencil) {
  check_epsilon(epsilon);
  if (stride == 0) stride = 1;
  for (Parameter* p : params) p->zero_grad();
  Var out = loss();
  scalar_value(out, "base point");
  backward(out);

  GradientCheckReport report;
  NoGradGuard no_grad;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); i += stride) {
      const std::string where = p->name + "[" + std::to_string(i) + "]";
      const double saved = p->value[i];
      const double numeric = numeric_derivative(
          [&](double d) {
            p->value[i] = saved + d;
            return scalar_value(loss(), where);
          },
          epsilon, stencil);
      p->value[i] = saved;
      record(report, p->grad[i], numeric, where);
    }
  }
  return report;
}

}  // namespace smoothsinger::numerics
