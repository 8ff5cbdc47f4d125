#pragma once

#include "composer/dataset.hpp"
#include "composer/tensor.hpp"

namespace composer {

struct AssetFidelity {
  int asset_index = 0;
  Category category = Category::kUpper;
  float region_error = 0.0f;   // mean |generated - expected| over the region
  float pattern_corr = 1.0f;   // Pearson over the region, case-wise at zero variance
  int pixel_count = 0;
};

struct FidelityReport {
  std::vector<AssetFidelity> assets;
  float mean_region_error = 0.0f;
  float mean_pattern_corr = 1.0f;
};

/// Pixel-space, region-restricted fidelity: each asset is scored over the
/// body-part region it dresses, against the deterministic expected render.
/// Zero-variance cases: both sides flat and equal -> 1, otherwise 0.
FidelityReport region_fidelity(const Tensor& generated, const FigureRaster& raster,
                               const std::vector<AssetImage>& assets);

FidelityReport region_fidelity(const Tensor& generated, const DatasetSample& sample);

/// Pearson correlation with the case-wise zero-variance convention above.
float pearson(const std::vector<float>& a, const std::vector<float>& b);

}  // namespace composer
