#include "composer/metrics.hpp"

#include <cmath>

#include "composer/errors.hpp"

namespace composer {

float pearson(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw DimensionError("pearson: length mismatch");
  const size_t n = a.size();
  if (n == 0) return 1.0f;
  double mean_a = 0.0, mean_b = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 && var_b == 0.0) {
    bool equal = true;
    for (size_t i = 0; i < n && equal; ++i) equal = a[i] == b[i];
    return equal ? 1.0f : 0.0f;
  }
  if (var_a == 0.0 || var_b == 0.0) return 0.0f;
  return static_cast<float>(cov / std::sqrt(var_a * var_b));
}

FidelityReport region_fidelity(const Tensor& generated, const FigureRaster& raster,
                               const std::vector<AssetImage>& assets) {
  const int h = raster.uv.height, w = raster.uv.width;
  if (generated.ndim() != 3 || generated.dim(0) != h || generated.dim(1) != w ||
      generated.dim(2) != 1) {
    throw DimensionError("region_fidelity: generated " + shape_str(generated.shape()) +
                         " vs canvas " + std::to_string(h) + "x" + std::to_string(w));
  }
  const Tensor expected = dressed_render(raster, assets);

  FidelityReport report;
  float err_sum = 0.0f, corr_sum = 0.0f;
  int counted = 0;
  for (size_t ai = 0; ai < assets.size(); ++ai) {
    AssetFidelity fid;
    fid.asset_index = static_cast<int>(ai);
    fid.category = assets[ai].category;

    std::vector<float> gen_vals, exp_vals;
    for (int part_id = 1; part_id < kPartCount; ++part_id) {
      auto cat = category_for_part(static_cast<Part>(part_id));
      if (!cat || *cat != assets[ai].category) continue;
      for (const auto& [r, c] : raster.part_pixels[static_cast<size_t>(part_id)]) {
        gen_vals.push_back(generated.data()[r * w + c]);
        exp_vals.push_back(expected.data()[r * w + c]);
      }
    }
    fid.pixel_count = static_cast<int>(gen_vals.size());
    if (fid.pixel_count > 0) {
      float acc = 0.0f;
      for (size_t i = 0; i < gen_vals.size(); ++i) acc += std::fabs(gen_vals[i] - exp_vals[i]);
      fid.region_error = acc / static_cast<float>(fid.pixel_count);
      fid.pattern_corr = pearson(gen_vals, exp_vals);
      err_sum += fid.region_error;
      corr_sum += fid.pattern_corr;
      ++counted;
    }
    report.assets.push_back(fid);
  }
  if (counted > 0) {
    report.mean_region_error = err_sum / static_cast<float>(counted);
    report.mean_pattern_corr = corr_sum / static_cast<float>(counted);
  }
  return report;
}

FidelityReport region_fidelity(const Tensor& generated, const DatasetSample& sample) {
  FigureRaster raster =
      rasterize_figure(sample.figure, sample.uv.height, sample.uv.width);
  return region_fidelity(generated, raster, sample.assets);
}

}  // namespace composer
