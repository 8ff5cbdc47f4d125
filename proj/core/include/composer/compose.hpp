#pragma once

#include <cstdint>
#include <vector>

#include "composer/asset.hpp"
#include "composer/tensor.hpp"

namespace composer {

struct Placement {
  int asset_index = 0;
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;
};

/// The "asset library" canvas: every reference element placed without
/// overlap on a white background. Masks live in canvas space, one per asset,
/// pairwise disjoint.
struct AssetComposition {
  int height = 0;
  int width = 0;
  Tensor canvas;  // [H, W, 1]
  std::vector<Placement> placements;
  std::vector<Tensor> masks;       // [H, W] binary, canvas space
  std::vector<int> phrase_links;   // asset index -> phrase span index
};

/// Deterministic placement: rejection-sample top-left corners (at most 200
/// tries per asset); if any asset fails, redo the whole layout with
/// row-major shelf packing. Throws CapacityError when even shelf packing
/// cannot fit the assets.
AssetComposition compose_assets(const std::vector<AssetImage>& assets, int canvas_h, int canvas_w,
                                std::uint64_t seed);

/// Majority-coverage downsample: output cell (r, c) is on iff the fraction
/// of on pixels in its receptive cell is >= threshold; ties at exactly the
/// threshold are selected. Requires integer cell ratios.
Tensor downsample_mask(const Tensor& mask, int out_h, int out_w, float threshold = 0.5f);

struct BlockDims {
  int block_id = 0;
  int height = 0;
  int width = 0;
};

/// Flattened key/value token indices of one network block that belong to
/// each asset. Indices are strictly increasing, row-major (index = r*w + c).
struct TokenSelection {
  int block_id = 0;
  int height = 0;
  int width = 0;
  std::vector<std::vector<int>> asset_tokens;  // per asset, sorted
};

std::vector<TokenSelection> token_selection(const AssetComposition& composition,
                                            const std::vector<BlockDims>& blocks,
                                            float threshold = 0.5f);

}  // namespace composer
