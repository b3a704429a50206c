#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "smoothsinger/numerics/autograd.hpp"

namespace smoothsinger::numerics {

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::string worst_location;  // "<input or parameter>[<flat index>]"
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

// Central: (f(x+h) - f(x-h)) / 2h.
// FivePoint: (-f(x+2h) + 8 f(x+h) - 8 f(x-h) + f(x-2h)) / 12h, fourth-order
// accurate, so a larger h can be used where roundoff dominates.
enum class Stencil { Central, FivePoint };

// Compares reverse-mode gradients of a scalar function with finite
// differences. Relative error per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
// epsilon must lie in [1e-7, 1e-3].
GradientCheckReport finite_difference_check(const std::function<Var(const std::vector<Var>&)>& fn,
                                            const std::vector<Tensor>& point, double epsilon,
                                            Stencil stencil = Stencil::Central);

// Same check over model parameters; `loss` rebuilds the graph from the
// current parameter values on every call. A nonzero `stride` checks every
// stride-th coordinate of each parameter.
GradientCheckReport finite_difference_check(const std::function<Var()>& loss, std::span<Parameter* const> params,
                                            double epsilon, std::size_t stride = 1,
                                            Stencil stencil = Stencil::Central);

}  // namespace smoothsinger::numerics
