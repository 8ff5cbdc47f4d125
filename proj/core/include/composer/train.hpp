#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "composer/gradcheck.hpp"
#include "composer/pipeline.hpp"

namespace composer {

struct TrainConfig {
  int steps = 500;
  float lr = 1e-2f;
  float weight_decay = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  int T = 60;  // schedule length during training
  std::uint64_t seed = 0;
};

/// Adam with decoupled weight decay; state keyed by parameter order.
class AdamW {
 public:
  AdamW(const ParamStore& params, const TrainConfig& config);
  void step(ParamStore& params, const std::vector<Tensor>& grads);
  int steps_taken() const { return t_; }

 private:
  TrainConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  int t_ = 0;
};

/// Noise-prediction loss with an arbitrary predictor, for oracles and small
/// checks: mean squared error between eps and predictor(z_t, t).
float training_loss_with(const std::function<Tensor(const Tensor& z_t, int t)>& predictor,
                         const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& s);

/// Full-pipeline objective for one (sample, t, eps) draw: reference pass,
/// binding, injection, denoiser prediction, MSE against eps. Returns the
/// loss node of a graph rooted at `params`.
ad::VarPtr training_loss_graph(const CompositionModel& model, const GraphParams& params,
                               const PreparedSample& ps, int t, const Tensor& eps,
                               const NoiseSchedule& s);

float training_loss(const CompositionModel& model, const PreparedSample& ps, int t,
                    const Tensor& eps, const NoiseSchedule& s);

struct TrainResult {
  std::vector<float> losses;  // one entry per step
};

/// Deterministic single-threaded loop: each step draws (sample index, t,
/// eps) from the seeded stream and takes one AdamW step on all parameters.
/// Throws NumericError with diagnostics if the loss goes non-finite.
TrainResult train(CompositionModel& model, const std::vector<DatasetSample>& dataset,
                  const TextEmbedder& embedder, const TrainConfig& config);

void save_loss_curve(const TrainResult& result, const std::filesystem::path& path);

/// Finite-difference check of the full objective (reference pass, binding,
/// injection, cross-attention, denoiser) against the tape's gradients, one
/// probe set per parameter tensor. Parameters are re-randomized (including
/// zero-initialized layers) so every gradient path carries signal.
GradReport model_gradcheck(const ModelConfig& config, std::uint64_t seed, float eps, float tol,
                           int max_probes_per_param = 8);

}  // namespace composer
