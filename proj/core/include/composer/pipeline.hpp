#pragma once

#include <cstdint>

#include "composer/codec.hpp"
#include "composer/dataset.hpp"
#include "composer/embedder.hpp"
#include "composer/model.hpp"
#include "composer/rng.hpp"
#include "composer/schedule.hpp"

namespace composer {

/// Channel concatenation [latent | aux]. Generation expects a 2-channel
/// densepose-style aux (6 conv-in channels total); try-on expects a
/// 4-channel cloth-agnostic latent plus a 1-channel mask (9 total).
Tensor assemble_conditioning(RunMode mode, const Tensor& latent, const Tensor& aux);

/// (u, v) channels of a UV map, nearest-downsampled to latent resolution.
Tensor uv_conditioning(const UVMap& uv, int latent_h, int latent_w);

/// Try-on aux: encode the cloth-agnostic image (garment pixels blanked to
/// 0.5) and append the garment mask at latent resolution.
Tensor tryon_conditioning(const Tensor& target, const Tensor& garment_mask_canvas, int latent_h,
                          int latent_w);

/// Union of the part regions dressed by the sample's asset categories.
Tensor garment_region_mask(const FigureRaster& raster, const std::vector<AssetImage>& assets);

/// Everything the reference side needs for one composition.
struct ReferenceInputs {
  Tensor ref_input;  // [4 or 5, lh, lw]
  std::vector<TokenSelection> selections;
  std::vector<PhraseEmbedding> phrases;
};

ReferenceInputs prepare_reference(const CompositionModel& model, const AssetComposition& comp,
                                  const TextEmbedder& embedder, const TextPrompt& prompt);

/// Model-ready view of a dataset sample.
struct PreparedSample {
  Tensor z0;    // [4, lh, lw]
  Tensor aux;   // mode-dependent channels at latent resolution
  Tensor text;  // [s x c]
  ReferenceInputs ref;
};

PreparedSample prepare_sample(const CompositionModel& model, const TextEmbedder& embedder,
                              const DatasetSample& sample);

/// One DDPM ancestral update:
///   z_{t-1} = (z_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t) + sqrt(beta_t) * xi
/// with xi = 0 at t = 1.
Tensor ancestral_step(const Tensor& z_t, const Tensor& eps_hat, int t, const NoiseSchedule& s,
                      const Tensor& xi);

struct StepResult {
  Tensor eps_hat;
  Tensor z_prev;
};

/// Predict noise at (z_t, t) with optional injection taps, then apply the
/// ancestral update drawing xi from `noise`.
StepResult denoise_step(const CompositionModel& model, const GraphParams& params,
                        const Tensor& z_t, int t, const Tensor& aux, const Tensor& text,
                        const RefTaps* taps, const NoiseSchedule& s, Rng& noise,
                        const KVInterceptor& interceptor = nullptr);

struct SampleResult {
  Tensor image;   // [H, W, 1], decoded, clamped to [0, 1]
  Tensor latent;  // final latent, unclamped
};

/// Full reverse chain: run the reference net once on the clean composition
/// latent, bind its K/V, then denoise from seeded z_T for `steps` steps
/// (steps < T leaves the chain early; steps = 0 decodes the initial noise).
SampleResult sample(const CompositionModel& model, const NoiseSchedule& schedule,
                    const ReferenceInputs& ref, const Tensor& aux, const Tensor& text,
                    std::uint64_t seed, int steps, const KVInterceptor& interceptor = nullptr);

}  // namespace composer
