#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "composer/asset.hpp"
#include "composer/caption.hpp"
#include "composer/compose.hpp"
#include "composer/figure.hpp"
#include "composer/tensor.hpp"

namespace composer {

struct DatasetConfig {
  int count = 16;
  int canvas_h = 64;
  int canvas_w = 48;
  std::vector<Category> categories = {Category::kUpper, Category::kLower};
  std::uint64_t seed = 0;
};

/// One training example. The generator is its own ground truth: the target
/// image is the deterministic dressed render of the figure, so every sample
/// is reconstructible from (config, index) alone.
struct DatasetSample {
  int id = 0;
  std::uint64_t seed = 0;
  FigureParams figure;
  std::vector<AssetImage> assets;
  AssetComposition composition;
  TextPrompt prompt;
  UVMap uv;
  Tensor target;  // [H, W, 1]
};

/// Category-proportional asset dimensions for a canvas.
std::pair<int, int> asset_size_for(Category category, int canvas_h, int canvas_w);

/// Render assets onto the figure's part regions: each dressed part samples
/// its asset's mask rectangle resampled (nearest) to the part's bounding
/// box; bare body pixels take a fixed skin tone, background stays white.
Tensor dressed_render(const FigureRaster& raster, const std::vector<AssetImage>& assets);

inline constexpr float kSkinTone = 0.8f;

/// Pure function of (config, index).
DatasetSample make_sample(const DatasetConfig& config, int index);

/// Rebuild a composition from stored placements (masks are not persisted).
AssetComposition composition_from_placements(const std::vector<AssetImage>& assets,
                                             const std::vector<Placement>& placements,
                                             int canvas_h, int canvas_w);

/// Write count samples plus manifest.json. Byte-identical across reruns.
void generate_dataset(const DatasetConfig& config, const std::filesystem::path& dir);

std::vector<DatasetSample> load_dataset(const std::filesystem::path& dir);
DatasetConfig load_dataset_config(const std::filesystem::path& dir);

}  // namespace composer
