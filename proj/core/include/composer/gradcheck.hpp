#pragma once

#include <functional>
#include <string>
#include <vector>

#include "composer/tensor.hpp"

namespace composer {

struct ParamCheck {
  std::string name;
  float max_rel_err = 0.0f;
  int probes = 0;
};

struct GradReport {
  std::vector<ParamCheck> params;
  float max_rel_err = 0.0f;
  int probe_count = 0;
  float tolerance = 0.0f;
  bool pass = false;
};

struct GradCheckTarget {
  /// Scalar objective; must be pure and deterministic in the parameters.
  /// Returns float64 so the central differences sit well above the rounding
  /// floor (autodiff graphs provide this via dual-precision mode).
  std::function<double(const std::vector<Tensor>&)> value;
  /// Analytic gradients, one tensor per parameter, same shapes.
  std::function<std::vector<Tensor>(const std::vector<Tensor>&)> gradient;
};

/// Central-difference check: for each probed coordinate,
///   numeric = (f(x+eps) - f(x-eps)) / (2 eps)
///   rel_err = |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
/// Tensors larger than max_probes_per_param are probed on an evenly strided
/// subset. Throws NumericError if f evaluates non-finite.
GradReport finite_diff_gradcheck(const GradCheckTarget& target, std::vector<Tensor> params,
                                 float eps, float tol,
                                 const std::vector<std::string>& names = {},
                                 int max_probes_per_param = 64);

/// One line per parameter plus a verdict, for CLI output.
std::string format_grad_report(const GradReport& report);

}  // namespace composer
