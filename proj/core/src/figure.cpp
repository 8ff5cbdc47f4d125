#include "composer/figure.hpp"

#include <cmath>

#include "composer/errors.hpp"

namespace composer {

namespace {

constexpr float kLimbSpacing = 1.5f;  // > sqrt(2): rotated texels never share a pixel

struct Sample {
  int row, col;
  float u, v;
};

// Dense axis-aligned rectangle; u runs across columns, v down rows.
void raster_rect(int r0, int c0, int h, int w, std::vector<Sample>& out) {
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      out.push_back({r0 + r, c0 + c, (c + 0.5f) / static_cast<float>(w),
                     (r + 0.5f) / static_cast<float>(h)});
}

// Dense disc inside its bounding box.
void raster_disc(int center_r, int center_c, int radius, std::vector<Sample>& out) {
  if (radius <= 0) return;
  const int d = 2 * radius;
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      const float dr = r + 0.5f - radius;
      const float dc = c + 0.5f - radius;
      if (dr * dr + dc * dc <= static_cast<float>(radius) * radius) {
        out.push_back({center_r - radius + r, center_c - radius + c,
                       (c + 0.5f) / static_cast<float>(d), (r + 0.5f) / static_cast<float>(d)});
      }
    }
  }
}

// Forward-mapped texel grid: texel (i, j) lands at
//   anchor + spacing*(i+0.5)*dir + spacing*(j - (wid-1)/2)*perp
// where dir points along the limb. Each texel keeps its grid-local (u, v),
// so the sample set is independent of the rotation angle.
void raster_limb(float anchor_r, float anchor_c, float angle, bool mirror, int len, int wid,
                 std::vector<Sample>& out) {
  const float a = mirror ? -angle : angle;
  const float dir_r = std::cos(a);
  const float dir_c = std::sin(a);
  const float perp_r = -dir_c;
  const float perp_c = dir_r;
  for (int i = 0; i < len; ++i) {
    for (int j = 0; j < wid; ++j) {
      const float along = kLimbSpacing * (i + 0.5f);
      const float across = kLimbSpacing * (j - (wid - 1) * 0.5f);
      const float rr = anchor_r + along * dir_r + across * perp_r;
      const float cc = anchor_c + along * dir_c + across * perp_c;
      out.push_back({static_cast<int>(std::lround(rr)), static_cast<int>(std::lround(cc)),
                     (j + 0.5f) / static_cast<float>(wid), (i + 0.5f) / static_cast<float>(len)});
    }
  }
}

}  // namespace

std::optional<Category> category_for_part(Part part) {
  switch (part) {
    case Part::kHead:
      return Category::kFace;
    case Part::kTorso:
      return Category::kUpper;
    case Part::kLegL:
    case Part::kLegR:
      return Category::kLower;
    case Part::kFootL:
    case Part::kFootR:
      return Category::kShoes;
    default:
      return std::nullopt;
  }
}

const char* category_name(Category c) {
  switch (c) {
    case Category::kUpper:
      return "upper";
    case Category::kLower:
      return "lower";
    case Category::kShoes:
      return "shoes";
    case Category::kFace:
      return "face";
  }
  return "?";
}

const char* part_name(Part p) {
  switch (p) {
    case Part::kBackground:
      return "background";
    case Part::kHead:
      return "head";
    case Part::kTorso:
      return "torso";
    case Part::kArmL:
      return "arm_l";
    case Part::kArmR:
      return "arm_r";
    case Part::kLegL:
      return "leg_l";
    case Part::kLegR:
      return "leg_r";
    case Part::kFootL:
      return "foot_l";
    case Part::kFootR:
      return "foot_r";
  }
  return "?";
}

FigureParams default_figure(int canvas_h, int canvas_w) {
  FigureParams p;
  p.torso_height = canvas_h / 4;
  p.torso_width = canvas_w / 4;
  p.head_radius = std::max(1, canvas_h / 16);
  p.anchor_col = (canvas_w - p.torso_width) / 2;
  p.anchor_row = 2 * p.head_radius + 4;
  p.arm_len = std::max(2, canvas_h / 13);
  p.arm_wid = canvas_h >= 48 ? 2 : 1;
  p.leg_len = std::max(3, canvas_h / 9);
  p.leg_wid = canvas_h >= 48 ? 2 : 1;
  p.foot_len = canvas_h >= 48 ? 2 : 1;
  p.foot_wid = 2;
  return p;
}

Tensor UVMap::to_tensor() const {
  Tensor t({height, width, 3});
  for (int i = 0; i < height * width; ++i) {
    t.data()[i * 3 + 0] = u[static_cast<size_t>(i)];
    t.data()[i * 3 + 1] = v[static_cast<size_t>(i)];
    t.data()[i * 3 + 2] = static_cast<float>(part[static_cast<size_t>(i)]);
  }
  return t;
}

UVMap UVMap::from_tensor(const Tensor& t) {
  if (t.ndim() != 3 || t.dim(2) != 3) {
    throw DimensionError("UVMap::from_tensor: expected [H,W,3], got " + shape_str(t.shape()));
  }
  UVMap m;
  m.height = t.dim(0);
  m.width = t.dim(1);
  const int n = m.height * m.width;
  m.u.resize(static_cast<size_t>(n));
  m.v.resize(static_cast<size_t>(n));
  m.part.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    m.u[static_cast<size_t>(i)] = t.data()[i * 3 + 0];
    m.v[static_cast<size_t>(i)] = t.data()[i * 3 + 1];
    m.part[static_cast<size_t>(i)] = static_cast<int>(t.data()[i * 3 + 2]);
  }
  return m;
}

UVMap UVMap::downsample(int out_h, int out_w) const {
  if (out_h < 1 || out_w < 1 || height % out_h != 0 || width % out_w != 0) {
    throw DimensionError("UVMap::downsample: " + std::to_string(height) + "x" +
                         std::to_string(width) + " -> " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " is not an integer ratio");
  }
  const int fr = height / out_h;
  const int fc = width / out_w;
  UVMap out;
  out.height = out_h;
  out.width = out_w;
  out.u.resize(static_cast<size_t>(out_h) * out_w);
  out.v.resize(static_cast<size_t>(out_h) * out_w);
  out.part.resize(static_cast<size_t>(out_h) * out_w);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      const int src = idx(r * fr + fr / 2, c * fc + fc / 2);
      const int dst = r * out_w + c;
      out.u[static_cast<size_t>(dst)] = u[static_cast<size_t>(src)];
      out.v[static_cast<size_t>(dst)] = v[static_cast<size_t>(src)];
      out.part[static_cast<size_t>(dst)] = part[static_cast<size_t>(src)];
    }
  }
  return out;
}

FigureRaster rasterize_figure(const FigureParams& p, int canvas_h, int canvas_w) {
  if (canvas_h < 8 || canvas_w < 8) {
    throw ParameterError("rasterize_figure: canvas too small");
  }
  std::array<std::vector<Sample>, kPartCount> samples;

  raster_disc(p.anchor_row - p.head_radius - 2, p.anchor_col + p.torso_width / 2, p.head_radius,
              samples[static_cast<int>(Part::kHead)]);
  raster_rect(p.anchor_row, p.anchor_col, p.torso_height, p.torso_width,
              samples[static_cast<int>(Part::kTorso)]);

  const float shoulder_row = static_cast<float>(p.anchor_row + 1);
  raster_limb(shoulder_row, static_cast<float>(p.anchor_col - 3), p.arm_angle_l, true, p.arm_len,
              p.arm_wid, samples[static_cast<int>(Part::kArmL)]);
  raster_limb(shoulder_row, static_cast<float>(p.anchor_col + p.torso_width + 2), p.arm_angle_r,
              false, p.arm_len, p.arm_wid, samples[static_cast<int>(Part::kArmR)]);

  const float hip_row = static_cast<float>(p.anchor_row + p.torso_height + 1);
  const float hip_l = static_cast<float>(p.anchor_col + 1);
  const float hip_r = static_cast<float>(p.anchor_col + p.torso_width - 2);
  raster_limb(hip_row, hip_l, p.leg_angle_l, true, p.leg_len, p.leg_wid,
              samples[static_cast<int>(Part::kLegL)]);
  raster_limb(hip_row, hip_r, p.leg_angle_r, false, p.leg_len, p.leg_wid,
              samples[static_cast<int>(Part::kLegR)]);

  // Feet continue past the last leg texel along the same direction.
  const float foot_along = kLimbSpacing * (p.leg_len + 0.6f);
  for (bool left : {true, false}) {
    const float a = left ? -p.leg_angle_l : p.leg_angle_r;
    const float anchor_c = left ? hip_l : hip_r;
    raster_limb(hip_row + foot_along * std::cos(a), anchor_c + foot_along * std::sin(a),
                left ? p.leg_angle_l : p.leg_angle_r, left, p.foot_len, p.foot_wid,
                samples[static_cast<int>(left ? Part::kFootL : Part::kFootR)]);
  }

  FigureRaster raster;
  raster.uv.height = canvas_h;
  raster.uv.width = canvas_w;
  const size_t n = static_cast<size_t>(canvas_h) * canvas_w;
  raster.uv.u.assign(n, -1.0f);
  raster.uv.v.assign(n, -1.0f);
  raster.uv.part.assign(n, 0);
  raster.silhouette = Tensor::full({canvas_h, canvas_w, 1}, 1.0f);

  std::vector<int> owner(n, 0);
  for (int part_id = 1; part_id < kPartCount; ++part_id) {
    for (const Sample& s : samples[static_cast<size_t>(part_id)]) {
      if (s.row < 0 || s.row >= canvas_h || s.col < 0 || s.col >= canvas_w) {
        throw ParameterError(std::string("figure part ") +
                             part_name(static_cast<Part>(part_id)) + " leaves the canvas at (" +
                             std::to_string(s.row) + "," + std::to_string(s.col) + ")");
      }
      const size_t i = static_cast<size_t>(s.row) * canvas_w + s.col;
      if (owner[i] != 0) {
        throw ParameterError(std::string("figure parts ") +
                             part_name(static_cast<Part>(owner[i])) + " and " +
                             part_name(static_cast<Part>(part_id)) + " collide at (" +
                             std::to_string(s.row) + "," + std::to_string(s.col) + ")");
      }
      owner[i] = part_id;
      raster.uv.u[i] = s.u;
      raster.uv.v[i] = s.v;
      raster.uv.part[i] = part_id;
      raster.silhouette.data()[i] = 0.25f;
      raster.part_pixels[static_cast<size_t>(part_id)].push_back({s.row, s.col});
    }
  }
  return raster;
}

std::pair<Tensor, UVMap> generate_figure(const FigureParams& params, int canvas_h, int canvas_w) {
  FigureRaster raster = rasterize_figure(params, canvas_h, canvas_w);
  return {std::move(raster.silhouette), std::move(raster.uv)};
}

}  // namespace composer
