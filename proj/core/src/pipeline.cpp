#include "composer/pipeline.hpp"

#include <cmath>

#include "composer/errors.hpp"

namespace composer {

Tensor assemble_conditioning(RunMode mode, const Tensor& latent, const Tensor& aux) {
  if (latent.ndim() != 3 || latent.dim(0) != 4) {
    throw ModeError("assemble_conditioning: latent must be [4,h,w], got " +
                    shape_str(latent.shape()));
  }
  const int want_aux = mode == RunMode::kTryon ? 5 : 2;
  if (aux.ndim() != 3 || aux.dim(0) != want_aux || aux.dim(1) != latent.dim(1) ||
      aux.dim(2) != latent.dim(2)) {
    throw ModeError(std::string("assemble_conditioning: ") + run_mode_name(mode) +
                    " mode needs aux [" + std::to_string(want_aux) + "," +
                    std::to_string(latent.dim(1)) + "," + std::to_string(latent.dim(2)) +
                    "], got " + shape_str(aux.shape()));
  }
  return concat_channels(latent, aux);
}

Tensor uv_conditioning(const UVMap& uv, int latent_h, int latent_w) {
  UVMap down = uv.downsample(latent_h, latent_w);
  Tensor aux({2, latent_h, latent_w});
  for (int r = 0; r < latent_h; ++r) {
    for (int c = 0; c < latent_w; ++c) {
      aux(0, r, c) = down.u[static_cast<size_t>(down.idx(r, c))];
      aux(1, r, c) = down.v[static_cast<size_t>(down.idx(r, c))];
    }
  }
  return aux;
}

Tensor garment_region_mask(const FigureRaster& raster, const std::vector<AssetImage>& assets) {
  bool dressed[kCategoryCount] = {false, false, false, false};
  for (const auto& a : assets) dressed[static_cast<int>(a.category)] = true;

  Tensor mask({raster.uv.height, raster.uv.width});
  for (int part_id = 1; part_id < kPartCount; ++part_id) {
    auto cat = category_for_part(static_cast<Part>(part_id));
    if (!cat || !dressed[static_cast<int>(*cat)]) continue;
    for (const auto& [r, c] : raster.part_pixels[static_cast<size_t>(part_id)]) {
      mask(r, c) = 1.0f;
    }
  }
  return mask;
}

Tensor tryon_conditioning(const Tensor& target, const Tensor& garment_mask_canvas, int latent_h,
                          int latent_w) {
  if (target.ndim() != 3 || target.dim(2) != 1 || garment_mask_canvas.ndim() != 2 ||
      garment_mask_canvas.dim(0) != target.dim(0) || garment_mask_canvas.dim(1) != target.dim(1)) {
    throw DimensionError("tryon_conditioning: target " + shape_str(target.shape()) + " vs mask " +
                         shape_str(garment_mask_canvas.shape()));
  }
  Tensor agnostic = target;
  for (std::int64_t i = 0; i < garment_mask_canvas.numel(); ++i) {
    if (garment_mask_canvas.data()[i] != 0.0f) agnostic.data()[i] = 0.5f;
  }
  const Tensor agnostic_latent = LatentCodec{}.encode(agnostic);
  Tensor mask_latent = downsample_mask(garment_mask_canvas, latent_h, latent_w, 0.5f);
  Tensor aux({5, latent_h, latent_w});
  for (int ch = 0; ch < 4; ++ch)
    for (int r = 0; r < latent_h; ++r)
      for (int c = 0; c < latent_w; ++c) aux(ch, r, c) = agnostic_latent(ch, r, c);
  for (int r = 0; r < latent_h; ++r)
    for (int c = 0; c < latent_w; ++c) aux(4, r, c) = mask_latent(r, c);
  return aux;
}

ReferenceInputs prepare_reference(const CompositionModel& model, const AssetComposition& comp,
                                  const TextEmbedder& embedder, const TextPrompt& prompt) {
  const ModelConfig& cfg = model.config();
  if (comp.height != cfg.canvas_h || comp.width != cfg.canvas_w) {
    throw DimensionError("prepare_reference: composition " + std::to_string(comp.height) + "x" +
                         std::to_string(comp.width) + " vs model canvas " +
                         std::to_string(cfg.canvas_h) + "x" + std::to_string(cfg.canvas_w));
  }
  ReferenceInputs ref;
  const Tensor comp_latent = LatentCodec{}.encode(comp.canvas);
  if (cfg.binding == BindingMode::kConvInMask) {
    // Asset-index map instead of binding: mask pixels carry (i+1)/4.
    Tensor index_map({cfg.canvas_h, cfg.canvas_w});
    for (size_t i = 0; i < comp.masks.size(); ++i) {
      const float label = static_cast<float>(i + 1) / 4.0f;
      for (std::int64_t px = 0; px < index_map.numel(); ++px) {
        if (comp.masks[i].data()[px] != 0.0f) index_map.data()[px] = label;
      }
    }
    // Nearest-downsample to latent resolution (cell-center sample).
    Tensor channel({1, cfg.latent_h(), cfg.latent_w()});
    for (int r = 0; r < cfg.latent_h(); ++r)
      for (int c = 0; c < cfg.latent_w(); ++c) channel(0, r, c) = index_map(r * 2 + 1, c * 2 + 1);
    ref.ref_input = concat_channels(comp_latent, channel);
  } else {
    ref.ref_input = comp_latent;
  }
  ref.selections = token_selection(comp, cfg.block_dims());
  ref.phrases = embedder.phrase_embeddings(prompt);
  return ref;
}

PreparedSample prepare_sample(const CompositionModel& model, const TextEmbedder& embedder,
                              const DatasetSample& sample) {
  const ModelConfig& cfg = model.config();
  PreparedSample ps;
  ps.z0 = LatentCodec{}.encode(sample.target);
  ps.text = embedder.embed(sample.prompt);
  ps.ref = prepare_reference(model, sample.composition, embedder, sample.prompt);
  if (cfg.mode == RunMode::kTryon) {
    FigureRaster raster = rasterize_figure(sample.figure, cfg.canvas_h, cfg.canvas_w);
    ps.aux = tryon_conditioning(sample.target, garment_region_mask(raster, sample.assets),
                                cfg.latent_h(), cfg.latent_w());
  } else {
    ps.aux = uv_conditioning(sample.uv, cfg.latent_h(), cfg.latent_w());
  }
  return ps;
}

Tensor ancestral_step(const Tensor& z_t, const Tensor& eps_hat, int t, const NoiseSchedule& s,
                      const Tensor& xi) {
  if (t < 1 || t > s.T) {
    throw ParameterError("ancestral_step: t=" + std::to_string(t) + " outside [1, " +
                         std::to_string(s.T) + "]");
  }
  if (!z_t.same_shape(eps_hat) || !z_t.same_shape(xi)) {
    throw DimensionError("ancestral_step: shape mismatch");
  }
  const float beta = s.beta(t);
  const float coeff = beta / std::sqrt(1.0f - s.alpha_bar(t));
  const float inv_sqrt_alpha = 1.0f / std::sqrt(s.alpha(t));
  const float sigma = t > 1 ? std::sqrt(beta) : 0.0f;
  Tensor out = z_t;
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out.data()[i] =
        (z_t.data()[i] - coeff * eps_hat.data()[i]) * inv_sqrt_alpha + sigma * xi.data()[i];
  }
  return out;
}

StepResult denoise_step(const CompositionModel& model, const GraphParams& params,
                        const Tensor& z_t, int t, const Tensor& aux, const Tensor& text,
                        const RefTaps* taps, const NoiseSchedule& s, Rng& noise,
                        const KVInterceptor& interceptor) {
  const Tensor input = assemble_conditioning(model.config().mode, z_t, aux);
  ad::VarPtr eps_hat = model.denoiser_forward(params, input, t, text, taps, interceptor);
  if (!eps_hat->value.all_finite()) {
    throw NumericError("denoise_step: non-finite noise prediction at t=" + std::to_string(t));
  }
  // xi is drawn every step to keep the stream layout fixed; it is unused at t=1.
  Tensor xi = noise.normal_tensor(z_t.shape());
  if (t == 1) xi = Tensor(z_t.shape());
  StepResult result;
  result.z_prev = ancestral_step(z_t, eps_hat->value, t, s, xi);
  result.eps_hat = std::move(eps_hat->value);
  return result;
}

SampleResult sample(const CompositionModel& model, const NoiseSchedule& schedule,
                    const ReferenceInputs& ref, const Tensor& aux, const Tensor& text,
                    std::uint64_t seed, int steps, const KVInterceptor& interceptor) {
  if (steps < 0) throw ParameterError("sample: steps must be >= 0");
  const ModelConfig& cfg = model.config();
  GraphParams params = GraphParams::wrap(model.params(), /*requires_grad=*/false);
  RefTaps taps = model.reference_forward(params, ref.ref_input, text, ref.selections, ref.phrases);

  Rng rng = Rng(seed).derive("sample");
  Rng init_rng = rng.derive("init");
  Rng step_rng = rng.derive("steps");
  Tensor z = init_rng.normal_tensor({4, cfg.latent_h(), cfg.latent_w()});

  const int run = std::min(steps, schedule.T);
  for (int i = 0; i < run; ++i) {
    const int t = schedule.T - i;
    StepResult step = denoise_step(model, params, z, t, aux, text, &taps, schedule, step_rng,
                                   interceptor);
    z = std::move(step.z_prev);
  }

  SampleResult result;
  result.latent = z;
  result.image = LatentCodec{}.decode(z);
  for (auto& v : result.image.raw()) v = std::min(1.0f, std::max(0.0f, v));
  return result;
}

}  // namespace composer
