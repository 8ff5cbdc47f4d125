#pragma once

#include "composer/tensor.hpp"

namespace composer {

/// Linear-beta noise schedule. alphas[t] = 1 - betas[t], alpha_bars[t] the
/// running product; all arrays are 0-indexed while timesteps run 1..T.
struct NoiseSchedule {
  int T = 0;
  std::vector<float> betas;
  std::vector<float> alphas;
  std::vector<float> alpha_bars;

  float beta(int t) const { return betas[static_cast<size_t>(t - 1)]; }
  float alpha(int t) const { return alphas[static_cast<size_t>(t - 1)]; }
  float alpha_bar(int t) const { return alpha_bars[static_cast<size_t>(t - 1)]; }
};

/// Betas linearly spaced over [beta_start, beta_end] inclusive (T = 1 uses
/// beta_start alone). Requires 0 < beta_start <= beta_end < 1.
NoiseSchedule make_schedule(int T, float beta_start, float beta_end);

/// Desk-scale default: T steps with beta_end scaled by 1000/T so the
/// terminal alpha_bar stays in the usual diffusion regime at any T.
NoiseSchedule default_schedule(int T);

/// sqrt(abar_t) z0 + sqrt(1 - abar_t) eps for t in [1, T].
Tensor forward_diffuse(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& s);

}  // namespace composer
