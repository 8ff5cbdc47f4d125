#include "composer/album.hpp"

#include <fstream>
#include <map>

#include "composer/errors.hpp"
#include "composer/tensor_io.hpp"
#include "json.hpp"

namespace composer {

const char* consistency_mode_name(ConsistencyMode m) {
  switch (m) {
    case ConsistencyMode::kIndependent:
      return "independent";
    case ConsistencyMode::kCrossFrame:
      return "cfa";
    case ConsistencyMode::kCorrespondence:
      return "caa";
    case ConsistencyMode::kAligned:
      return "lca";
  }
  return "?";
}

ConsistencyMode consistency_mode_from_name(const std::string& s) {
  for (ConsistencyMode m : {ConsistencyMode::kIndependent, ConsistencyMode::kCrossFrame,
                            ConsistencyMode::kCorrespondence, ConsistencyMode::kAligned}) {
    if (s == consistency_mode_name(m)) return m;
  }
  throw ParameterError("unknown consistency mode '" + s + "'");
}

Tensor face_mask_from_uv(const UVMap& uv, int latent_h, int latent_w) {
  Tensor pixel_mask({uv.height, uv.width});
  for (size_t i = 0; i < uv.part.size(); ++i) {
    if (uv.part[i] == static_cast<int>(Part::kHead)) pixel_mask.data()[i] = 1.0f;
  }
  return downsample_mask(pixel_mask, latent_h, latent_w, 0.5f);
}

AlbumInputs make_album_inputs(const DatasetConfig& config, int frames, std::uint64_t seed) {
  if (frames < 1) throw ParameterError("make_album_inputs: need at least one frame");
  AlbumInputs inputs;
  Rng rng(mix_seed(config.seed, seed));
  Rng asset_rng = rng.derive("album_assets");
  for (Category cat : config.categories) {
    const auto [h, w] = asset_size_for(cat, config.canvas_h, config.canvas_w);
    const PatternKind pattern =
        static_cast<PatternKind>(asset_rng.uniform_int(0, kPatternCount - 1));
    const float base = asset_rng.uniform(0.05f, 0.45f);
    inputs.assets.push_back(generate_asset(cat, pattern, base, h, w, asset_rng.next_u64()));
  }
  inputs.composition = compose_assets(inputs.assets, config.canvas_h, config.canvas_w,
                                      rng.derive("album_compose").seed());
  inputs.prompt = caption_sample(inputs.assets);

  Rng fig_rng = rng.derive("album_figures");
  for (int f = 0; f < frames; ++f) {
    FigureParams fig = default_figure(config.canvas_h, config.canvas_w);
    fig.arm_angle_l = fig_rng.uniform(-0.1f, 0.6f);
    fig.arm_angle_r = fig_rng.uniform(-0.1f, 0.6f);
    fig.leg_angle_l = fig_rng.uniform(-0.08f, 0.35f);
    fig.leg_angle_r = fig_rng.uniform(-0.08f, 0.35f);
    inputs.figures.push_back(fig);
  }
  return inputs;
}

namespace {

// Captured frame-1 K/V per block for one denoising step.
struct StepCapture {
  std::map<int, KVPair> blocks;
};

}  // namespace

LatentAlbum generate_album(const CompositionModel& model, const TextEmbedder& embedder,
                           const NoiseSchedule& schedule, const AlbumInputs& inputs,
                           ConsistencyMode mode, std::uint64_t seed, int steps,
                           const std::vector<std::uint64_t>* frame_seeds) {
  const int n = static_cast<int>(inputs.figures.size());
  if (n < 1) throw ParameterError("generate_album: need at least one figure");
  if (mode == ConsistencyMode::kAligned) {
    LatentAlbum cfa = generate_album(model, embedder, schedule, inputs,
                                     ConsistencyMode::kCrossFrame, seed, steps, frame_seeds);
    LatentAlbum caa = generate_album(model, embedder, schedule, inputs,
                                     ConsistencyMode::kCorrespondence, seed, steps, frame_seeds);
    return latent_code_alignment(cfa, caa);
  }

  const ModelConfig& cfg = model.config();
  GraphParams params = GraphParams::wrap(model.params(), /*requires_grad=*/false);
  const ReferenceInputs ref = prepare_reference(model, inputs.composition, embedder, inputs.prompt);
  const Tensor text = embedder.embed(inputs.prompt);
  RefTaps taps = model.reference_forward(params, ref.ref_input, text, ref.selections, ref.phrases);

  LatentAlbum album;
  album.mode = mode;
  std::vector<Tensor> aux;
  std::vector<Rng> step_rngs;
  std::vector<std::vector<UVMap>> block_uv(static_cast<size_t>(n));
  for (int f = 0; f < n; ++f) {
    FigureRaster raster = rasterize_figure(inputs.figures[static_cast<size_t>(f)], cfg.canvas_h,
                                           cfg.canvas_w);
    album.uvmaps.push_back(raster.uv);
    album.face_masks.push_back(face_mask_from_uv(raster.uv, cfg.latent_h(), cfg.latent_w()));
    aux.push_back(uv_conditioning(raster.uv, cfg.latent_h(), cfg.latent_w()));
    for (int l = 0; l < cfg.levels; ++l) {
      block_uv[static_cast<size_t>(f)].push_back(raster.uv.downsample(cfg.block_h(l), cfg.block_w(l)));
    }

    const std::uint64_t fseed = frame_seeds != nullptr
                                    ? frame_seeds->at(static_cast<size_t>(f))
                                    : mix_seed(seed, static_cast<std::uint64_t>(f));
    Rng rng = Rng(fseed).derive("sample");
    album.seeds.push_back(fseed);
    Rng init = rng.derive("init");
    album.latents.push_back(init.normal_tensor({4, cfg.latent_h(), cfg.latent_w()}));
    step_rngs.push_back(rng.derive("steps"));
  }

  const int run = std::min(steps, schedule.T);
  for (int i = 0; i < run; ++i) {
    const int t = schedule.T - i;

    StepCapture capture;
    KVInterceptor capture_hook = nullptr;
    if (mode != ConsistencyMode::kIndependent) {
      capture_hook = [&capture](int block_id, const Tensor& k, const Tensor& v) {
        capture.blocks.emplace(block_id, KVPair{k, v, block_id});
        return std::make_pair(k, v);
      };
    }
    StepResult lead = denoise_step(model, params, album.latents[0], t, aux[0], text, &taps,
                                   schedule, step_rngs[0], capture_hook);
    album.latents[0] = std::move(lead.z_prev);

    for (int f = 1; f < n; ++f) {
      KVInterceptor substitute_hook = nullptr;
      if (mode == ConsistencyMode::kCrossFrame) {
        substitute_hook = [&capture](int block_id, const Tensor& k, const Tensor& v) {
          const KVPair& lead_kv = capture.blocks.at(block_id);
          std::vector<KVPair> pair = cross_frame_substitute({lead_kv, KVPair{k, v, block_id}});
          return std::make_pair(std::move(pair[1].keys), std::move(pair[1].values));
        };
      } else if (mode == ConsistencyMode::kCorrespondence) {
        substitute_hook = [&capture, &block_uv, f](int block_id, const Tensor& k, const Tensor& v) {
          const KVPair& lead_kv = capture.blocks.at(block_id);
          const size_t level = static_cast<size_t>(block_id - 1);
          std::vector<KVPair> pair = correspondence_substitute(
              {lead_kv, KVPair{k, v, block_id}},
              {block_uv[0][level], block_uv[static_cast<size_t>(f)][level]}, kUVQuant);
          return std::make_pair(std::move(pair[1].keys), std::move(pair[1].values));
        };
      }
      StepResult step = denoise_step(model, params, album.latents[static_cast<size_t>(f)], t,
                                     aux[static_cast<size_t>(f)], text, &taps, schedule,
                                     step_rngs[static_cast<size_t>(f)], substitute_hook);
      album.latents[static_cast<size_t>(f)] = std::move(step.z_prev);
    }
  }

  for (int f = 0; f < n; ++f) {
    Tensor img = LatentCodec{}.decode(album.latents[static_cast<size_t>(f)]);
    for (auto& v : img.raw()) v = std::min(1.0f, std::max(0.0f, v));
    album.images.push_back(std::move(img));
  }
  return album;
}

LatentAlbum latent_code_alignment(const LatentAlbum& cfa, const LatentAlbum& caa) {
  if (cfa.latents.size() != caa.latents.size()) {
    throw DimensionError("latent_code_alignment: album sizes differ");
  }
  LatentAlbum out = caa;
  out.mode = ConsistencyMode::kAligned;
  for (size_t f = 0; f < caa.latents.size(); ++f) {
    if (!cfa.latents[f].same_shape(caa.latents[f]) ||
        !bit_equal(cfa.face_masks[f], caa.face_masks[f])) {
      throw DimensionError("latent_code_alignment: frame " + std::to_string(f) +
                           " shape or face-mask mismatch");
    }
    const Tensor& mask = caa.face_masks[f];
    const int lh = mask.dim(0), lw = mask.dim(1);
    for (int r = 0; r < lh; ++r) {
      for (int c = 0; c < lw; ++c) {
        if (mask(r, c) == 0.0f) continue;
        for (int ch = 0; ch < 4; ++ch) {
          out.latents[f](ch, r, c) = cfa.latents[f](ch, r, c);
        }
      }
    }
    Tensor img = LatentCodec{}.decode(out.latents[f]);
    for (auto& v : img.raw()) v = std::min(1.0f, std::max(0.0f, v));
    out.images[f] = std::move(img);
  }
  return out;
}

float album_face_distance(const LatentAlbum& album) {
  const size_t n = album.images.size();
  if (n < 2) return 0.0f;
  float pair_sum = 0.0f;
  int pair_count = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      float acc = 0.0f;
      int count = 0;
      const UVMap& ua = album.uvmaps[i];
      const UVMap& ub = album.uvmaps[j];
      for (size_t px = 0; px < ua.part.size(); ++px) {
        if (ua.part[px] == static_cast<int>(Part::kHead) &&
            ub.part[px] == static_cast<int>(Part::kHead)) {
          acc += std::fabs(album.images[i].data()[px] - album.images[j].data()[px]);
          ++count;
        }
      }
      if (count > 0) {
        pair_sum += acc / static_cast<float>(count);
        ++pair_count;
      }
    }
  }
  return pair_count > 0 ? pair_sum / static_cast<float>(pair_count) : 0.0f;
}

float album_garment_error(const LatentAlbum& album, const AlbumInputs& inputs) {
  float acc = 0.0f;
  int count = 0;
  for (size_t f = 0; f < album.images.size(); ++f) {
    FigureRaster raster = rasterize_figure(inputs.figures[f], album.uvmaps[f].height,
                                           album.uvmaps[f].width);
    FidelityReport report = region_fidelity(album.images[f], raster, inputs.assets);
    for (const auto& a : report.assets) {
      if (a.category == Category::kFace || a.pixel_count == 0) continue;
      acc += a.region_error;
      ++count;
    }
  }
  return count > 0 ? acc / static_cast<float>(count) : 0.0f;
}

void save_album(const LatentAlbum& album, const AlbumInputs& inputs,
                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["mode"] = consistency_mode_name(album.mode);
  manifest["seeds"] = album.seeds;
  nlohmann::json figures = nlohmann::json::array();
  for (size_t f = 0; f < inputs.figures.size(); ++f) {
    const FigureParams& fig = inputs.figures[f];
    figures.push_back({{"arm_angle_l", fig.arm_angle_l},
                       {"arm_angle_r", fig.arm_angle_r},
                       {"leg_angle_l", fig.leg_angle_l},
                       {"leg_angle_r", fig.leg_angle_r}});
    char stem[32];
    std::snprintf(stem, sizeof(stem), "frame%02zu", f);
    save_pgm(album.images[f], dir / (std::string(stem) + ".pgm"));
    save_tensor(album.latents[f], dir / (std::string(stem) + "_latent.tensor"));
  }
  manifest["figures"] = figures;
  std::ofstream out(dir / "album.json", std::ios::trunc);
  if (!out) throw IoError("cannot write album manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

}  // namespace composer
