#include "composer/schedule.hpp"

#include <cmath>

#include "composer/errors.hpp"

namespace composer {

NoiseSchedule make_schedule(int T, float beta_start, float beta_end) {
  if (T < 1) throw ParameterError("make_schedule: T must be >= 1");
  if (!(beta_start > 0.0f) || !(beta_start <= beta_end) || !(beta_end < 1.0f)) {
    throw ParameterError("make_schedule: need 0 < beta_start <= beta_end < 1, got [" +
                         std::to_string(beta_start) + ", " + std::to_string(beta_end) + "]");
  }
  NoiseSchedule s;
  s.T = T;
  s.betas.resize(static_cast<size_t>(T));
  s.alphas.resize(static_cast<size_t>(T));
  s.alpha_bars.resize(static_cast<size_t>(T));
  float bar = 1.0f;
  for (int i = 0; i < T; ++i) {
    const float beta =
        T == 1 ? beta_start
               : beta_start + (beta_end - beta_start) * static_cast<float>(i) / (T - 1);
    s.betas[static_cast<size_t>(i)] = beta;
    s.alphas[static_cast<size_t>(i)] = 1.0f - beta;
    bar *= 1.0f - beta;
    s.alpha_bars[static_cast<size_t>(i)] = bar;
  }
  return s;
}

NoiseSchedule default_schedule(int T) {
  // Cap beta_end so very short schedules stay valid.
  const float end = std::min(0.2f, 0.02f * (1000.0f / static_cast<float>(T)));
  return make_schedule(T, 1e-4f, std::max(1e-4f, end));
}

Tensor forward_diffuse(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& s) {
  if (t < 1 || t > s.T) {
    throw ParameterError("forward_diffuse: t=" + std::to_string(t) + " outside [1, " +
                         std::to_string(s.T) + "]");
  }
  if (!z0.same_shape(eps)) {
    throw DimensionError("forward_diffuse: z0 " + shape_str(z0.shape()) + " vs eps " +
                         shape_str(eps.shape()));
  }
  const float a = std::sqrt(s.alpha_bar(t));
  const float b = std::sqrt(1.0f - s.alpha_bar(t));
  Tensor out = z0;
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out.data()[i] = a * z0.data()[i] + b * eps.data()[i];
  }
  return out;
}

}  // namespace composer
