#pragma once

#include <array>
#include <optional>
#include <vector>

#include "composer/tensor.hpp"

namespace composer {

// Body part ids. 0 is background everywhere.
enum class Part : int {
  kBackground = 0,
  kHead = 1,
  kTorso = 2,
  kArmL = 3,
  kArmR = 4,
  kLegL = 5,
  kLegR = 6,
  kFootL = 7,
  kFootR = 8,
};
inline constexpr int kPartCount = 9;

enum class Category : int { kUpper = 0, kLower = 1, kShoes = 2, kFace = 3 };
inline constexpr int kCategoryCount = 4;

/// Dressing assignment: torso -> upper, legs -> lower, feet -> shoes,
/// head -> face. Arms stay bare.
std::optional<Category> category_for_part(Part part);
const char* category_name(Category c);
const char* part_name(Part p);

/// Parametric 2-D figure. Torso and head are dense axis-aligned shapes;
/// limbs are forward-mapped texel grids rotated about their anchors with a
/// spacing of 1.5 px, so every texel lands on its own pixel at any angle and
/// the set of (part, u, v) samples is pose-invariant.
struct FigureParams {
  int torso_height = 16;
  int torso_width = 12;
  int head_radius = 4;
  float arm_angle_l = 0.2f;  // radians from straight down, positive = outward
  float arm_angle_r = 0.2f;
  float leg_angle_l = 0.1f;
  float leg_angle_r = 0.1f;
  int anchor_row = 20;  // torso top-left
  int anchor_col = 18;
  int arm_len = 5;  // texels along the limb
  int arm_wid = 2;
  int leg_len = 7;
  int leg_wid = 2;
  int foot_len = 2;
  int foot_wid = 3;
};

/// Canvas-proportional default figure, centered horizontally.
FigureParams default_figure(int canvas_h, int canvas_w);

/// Per-pixel body-surface coordinates. Background carries the sentinel
/// (u, v) = (-1, -1) and part id 0. Within one part the (u, v) samples are
/// injective at the part's native resolution, and the same body point keeps
/// the same (u, v) under different limb angles.
struct UVMap {
  int height = 0;
  int width = 0;
  std::vector<float> u;
  std::vector<float> v;
  std::vector<int> part;

  int idx(int r, int c) const { return r * width + c; }
  bool is_background(int r, int c) const { return part[static_cast<size_t>(idx(r, c))] == 0; }

  /// [H, W, 3] tensor with channels (u, v, part_id) in the last axis.
  Tensor to_tensor() const;
  static UVMap from_tensor(const Tensor& t);

  /// Nearest-neighbor downsample to h' x w' (center-pixel sample per cell).
  UVMap downsample(int out_h, int out_w) const;
};

struct FigureRaster {
  UVMap uv;
  Tensor silhouette;  // [H, W, 1]; background 1.0, body 0.25
  // Pixel lists per part id, each entry (row, col) matching uv's samples.
  std::array<std::vector<std::pair<int, int>>, kPartCount> part_pixels;
};

/// Rasterize a figure onto an H x W canvas. Throws ParameterError when any
/// part leaves the canvas or two parts collide on a pixel.
FigureRaster rasterize_figure(const FigureParams& params, int canvas_h, int canvas_w);

/// The spec-level entry point: silhouette plus UV map.
std::pair<Tensor, UVMap> generate_figure(const FigureParams& params, int canvas_h, int canvas_w);

}  // namespace composer
