#pragma once

#include <cstdint>
#include <filesystem>

#include "composer/metrics.hpp"
#include "composer/pipeline.hpp"

namespace composer {

enum class ConsistencyMode : int {
  kIndependent = 0,
  kCrossFrame = 1,     // cfa: frames 2..N take frame 1's K/V wholesale
  kCorrespondence = 2, // caa: substitution only on matching quantized (u,v)
  kAligned = 3,        // lca: caa latents with cfa face regions stitched in
};

const char* consistency_mode_name(ConsistencyMode m);
ConsistencyMode consistency_mode_from_name(const std::string& s);

inline constexpr int kUVQuant = 16;

/// N final latents with their UV maps and latent-resolution face masks.
struct LatentAlbum {
  ConsistencyMode mode = ConsistencyMode::kIndependent;
  std::vector<Tensor> latents;     // [4, lh, lw]
  std::vector<Tensor> images;      // decoded [H, W, 1]
  std::vector<UVMap> uvmaps;       // canvas resolution
  std::vector<Tensor> face_masks;  // [lh, lw] binary
  std::vector<std::uint64_t> seeds;
};

/// (part == head) pixel mask downsampled to latent resolution with the same
/// majority rule used for token geometry.
Tensor face_mask_from_uv(const UVMap& uv, int latent_h, int latent_w);

struct AlbumInputs {
  std::vector<AssetImage> assets;
  AssetComposition composition;
  TextPrompt prompt;
  std::vector<FigureParams> figures;  // one per frame, input order; frame 1 leads
};

/// Deterministic album scenario: shared assets and composition, one figure
/// per frame with the same torso and head placement but varied limb angles,
/// so per-frame face masks coincide.
AlbumInputs make_album_inputs(const DatasetConfig& config, int frames, std::uint64_t seed);

/// Runs N reverse chains under the chosen mode. In non-independent modes
/// frame 1's per-step self-attention K/V are captured at every block and
/// substituted into frames 2..N through the corresponding kernel. Per-frame
/// noise streams derive from `seed` unless `frame_seeds` overrides them.
LatentAlbum generate_album(const CompositionModel& model, const TextEmbedder& embedder,
                           const NoiseSchedule& schedule, const AlbumInputs& inputs,
                           ConsistencyMode mode, std::uint64_t seed, int steps,
                           const std::vector<std::uint64_t>* frame_seeds = nullptr);

/// Stitch cfa's face-mask latent cells into caa's latents, frame by frame.
/// Applied on the final denoised latents only; idempotent; never touches
/// mask-off cells.
LatentAlbum latent_code_alignment(const LatentAlbum& cfa, const LatentAlbum& caa);

/// Mean over frame pairs of mean |img_i - img_j| over pixels that are face
/// pixels in both frames.
float album_face_distance(const LatentAlbum& album);

/// Mean per-asset garment region error across frames, against each frame's
/// deterministic expected render.
float album_garment_error(const LatentAlbum& album, const AlbumInputs& inputs);

void save_album(const LatentAlbum& album, const AlbumInputs& inputs,
                const std::filesystem::path& dir);

}  // namespace composer
