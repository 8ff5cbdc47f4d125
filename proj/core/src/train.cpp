#include "composer/train.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "composer/errors.hpp"

namespace composer {

AdamW::AdamW(const ParamStore& params, const TrainConfig& config) : config_(config) {
  m_.reserve(params.names.size());
  v_.reserve(params.names.size());
  for (const auto& name : params.names) {
    m_.emplace_back(params.values.at(name).shape());
    v_.emplace_back(params.values.at(name).shape());
  }
}

void AdamW::step(ParamStore& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.names.size()) {
    throw DimensionError("AdamW: " + std::to_string(grads.size()) + " grads for " +
                         std::to_string(params.names.size()) + " params");
  }
  ++t_;
  const float bc1 = 1.0f - std::pow(config_.beta1, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(config_.beta2, static_cast<float>(t_));
  for (size_t i = 0; i < grads.size(); ++i) {
    Tensor& p = params.values.at(params.names[i]);
    const Tensor& g = grads[i];
    if (!g.same_shape(p)) {
      throw DimensionError("AdamW: grad shape mismatch for '" + params.names[i] + "'");
    }
    for (std::int64_t j = 0; j < p.numel(); ++j) {
      float& m = m_[i].data()[j];
      float& v = v_[i].data()[j];
      const float gj = g.data()[j];
      m = config_.beta1 * m + (1.0f - config_.beta1) * gj;
      v = config_.beta2 * v + (1.0f - config_.beta2) * gj * gj;
      const float mhat = m / bc1;
      const float vhat = v / bc2;
      p.data()[j] -= config_.lr * (mhat / (std::sqrt(vhat) + config_.adam_eps) +
                                   config_.weight_decay * p.data()[j]);
    }
  }
}

float training_loss_with(const std::function<Tensor(const Tensor& z_t, int t)>& predictor,
                         const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& s) {
  const Tensor z_t = forward_diffuse(z0, t, eps, s);
  const Tensor pred = predictor(z_t, t);
  if (!pred.same_shape(eps)) {
    throw DimensionError("training_loss_with: prediction " + shape_str(pred.shape()) +
                         " vs eps " + shape_str(eps.shape()));
  }
  float acc = 0.0f;
  for (std::int64_t i = 0; i < eps.numel(); ++i) {
    const float d = pred.data()[i] - eps.data()[i];
    acc += d * d;
  }
  return acc / static_cast<float>(eps.numel());
}

ad::VarPtr training_loss_graph(const CompositionModel& model, const GraphParams& params,
                               const PreparedSample& ps, int t, const Tensor& eps,
                               const NoiseSchedule& s) {
  RefTaps taps = model.reference_forward(params, ps.ref.ref_input, ps.text, ps.ref.selections,
                                         ps.ref.phrases);
  const Tensor z_t = forward_diffuse(ps.z0, t, eps, s);
  const Tensor input = assemble_conditioning(model.config().mode, z_t, ps.aux);
  ad::VarPtr eps_hat = model.denoiser_forward(params, input, t, ps.text, &taps);
  return ad::mse(eps_hat, eps);
}

float training_loss(const CompositionModel& model, const PreparedSample& ps, int t,
                    const Tensor& eps, const NoiseSchedule& s) {
  GraphParams params = GraphParams::wrap(model.params(), /*requires_grad=*/false);
  return training_loss_graph(model, params, ps, t, eps, s)->value.data()[0];
}

TrainResult train(CompositionModel& model, const std::vector<DatasetSample>& dataset,
                  const TextEmbedder& embedder, const TrainConfig& config) {
  if (dataset.empty()) throw ParameterError("train: empty dataset");
  if (config.steps < 0) throw ParameterError("train: negative step count");

  const NoiseSchedule schedule = default_schedule(config.T);
  std::vector<PreparedSample> prepared;
  prepared.reserve(dataset.size());
  for (const auto& sample : dataset) prepared.push_back(prepare_sample(model, embedder, sample));

  AdamW optimizer(model.params(), config);
  Rng rng = Rng(config.seed).derive("train");
  TrainResult result;
  result.losses.reserve(static_cast<size_t>(config.steps));

  const std::vector<int> latent_shape = {4, model.config().latent_h(), model.config().latent_w()};
  for (int step = 0; step < config.steps; ++step) {
    const int idx = rng.uniform_int(0, static_cast<int>(dataset.size()) - 1);
    const int t = rng.uniform_int(1, schedule.T);
    const Tensor eps = rng.normal_tensor(latent_shape);

    GraphParams params = GraphParams::wrap(model.params(), /*requires_grad=*/true);
    ad::VarPtr loss = training_loss_graph(model, params, prepared[static_cast<size_t>(idx)], t,
                                          eps, schedule);
    const float loss_value = loss->value.data()[0];
    if (!std::isfinite(loss_value)) {
      throw NumericError("train: non-finite loss " + std::to_string(loss_value) + " at step " +
                         std::to_string(step) + " (sample " + std::to_string(idx) + ", t=" +
                         std::to_string(t) + ")");
    }
    ad::backward(loss);

    std::vector<Tensor> grads;
    grads.reserve(params.order.size());
    for (const auto& name : params.order) {
      ad::VarPtr var = params.at(name);
      grads.push_back(var->grad.empty() ? Tensor(var->value.shape()) : var->grad);
    }
    optimizer.step(model.params(), grads);
    result.losses.push_back(loss_value);
  }
  return result;
}

GradReport model_gradcheck(const ModelConfig& config, std::uint64_t seed, float eps, float tol,
                           int max_probes_per_param) {
  CompositionModel model(config);
  // Fresh small random values everywhere, so zero-initialized layers do not
  // mask upstream gradient paths.
  Rng master = Rng(seed).derive("gradcheck");
  for (const auto& name : model.params().names) {
    Tensor& p = model.params().at(name);
    Rng r = master.derive(name);
    for (auto& v : p.raw()) v = 0.4f * r.normal();
  }

  DatasetConfig dcfg;
  dcfg.count = 1;
  dcfg.canvas_h = config.canvas_h;
  dcfg.canvas_w = config.canvas_w;
  dcfg.seed = seed;
  if (config.mode == RunMode::kTryon) {
    dcfg.categories = {Category::kUpper, Category::kLower};
  }
  const DatasetSample sample = make_sample(dcfg, 0);
  const TextEmbedder embedder(config.text_dim, seed);
  const PreparedSample ps = prepare_sample(model, embedder, sample);
  const NoiseSchedule schedule = default_schedule(4);
  const int t = 3;
  const Tensor noise =
      Rng(seed).derive("gradcheck_eps").normal_tensor({4, config.latent_h(), config.latent_w()});

  const std::vector<std::string> names = model.params().names;
  auto apply = [&](const std::vector<Tensor>& params) {
    for (size_t i = 0; i < names.size(); ++i) model.params().at(names[i]) = params[i];
  };

  GradCheckTarget target;
  target.value = [&](const std::vector<Tensor>& params) {
    apply(params);
    GraphParams graph = GraphParams::wrap(model.params(), /*requires_grad=*/false);
    ad::set_dual_precision(true);
    ad::VarPtr loss = training_loss_graph(model, graph, ps, t, noise, schedule);
    ad::set_dual_precision(false);
    return ad::scalar_value(loss);
  };
  target.gradient = [&](const std::vector<Tensor>& params) {
    apply(params);
    GraphParams graph = GraphParams::wrap(model.params(), /*requires_grad=*/true);
    ad::VarPtr loss = training_loss_graph(model, graph, ps, t, noise, schedule);
    ad::backward(loss);
    std::vector<Tensor> grads;
    for (const auto& name : names) {
      ad::VarPtr var = graph.at(name);
      grads.push_back(var->grad.empty() ? Tensor(var->value.shape()) : var->grad);
    }
    return grads;
  };

  std::vector<Tensor> params;
  for (const auto& name : names) params.push_back(model.params().at(name));
  return finite_diff_gradcheck(target, std::move(params), eps, tol, names, max_probes_per_param);
}

void save_loss_curve(const TrainResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write loss curve " + path.string());
  out << "step,loss\n";
  char buf[40];
  for (size_t i = 0; i < result.losses.size(); ++i) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), result.losses[i],
                                   std::chars_format::general, 9);
    out << i << "," << std::string_view(buf, static_cast<size_t>(end - buf)) << "\n";
  }
}

}  // namespace composer
