#include "composer/asset.hpp"

#include "composer/errors.hpp"

namespace composer {

const char* pattern_name(PatternKind p) {
  switch (p) {
    case PatternKind::kSolid:
      return "solid";
    case PatternKind::kStripes:
      return "stripes";
    case PatternKind::kChecker:
      return "checker";
    case PatternKind::kDots:
      return "dots";
  }
  return "?";
}

PatternKind pattern_from_name(const std::string& name) {
  for (int i = 0; i < kPatternCount; ++i) {
    if (name == pattern_name(static_cast<PatternKind>(i))) return static_cast<PatternKind>(i);
  }
  throw ParameterError("unknown pattern '" + name + "'");
}

float pattern_value(PatternKind pattern, float base, int r, int c) {
  switch (pattern) {
    case PatternKind::kSolid:
      return base;
    case PatternKind::kStripes:
      return (r / 2) % 2 == 0 ? base : 1.0f - base;
    case PatternKind::kChecker:
      return (r / 2 + c / 2) % 2 == 0 ? base : 1.0f - base;
    case PatternKind::kDots: {
      const bool dot = (r % 4 == 1 || r % 4 == 2) && (c % 4 == 1 || c % 4 == 2);
      return dot ? base : 1.0f - base;
    }
  }
  throw ParameterError("unknown pattern id " + std::to_string(static_cast<int>(pattern)));
}

std::array<int, 4> category_mask_rect(Category category, int h, int w) {
  switch (category) {
    case Category::kUpper:
      return {0, 0, h * 3 / 4, w};  // wide, shirt-like
    case Category::kLower:
      return {0, w / 4, h, w - 2 * (w / 4)};  // tall, centered
    case Category::kShoes:
      return {h / 2, 0, h - h / 2, w};  // low profile
    case Category::kFace: {
      const int side = std::min(h, w);
      return {(h - side) / 2, (w - side) / 2, side, side};
    }
  }
  throw ParameterError("unknown category id " + std::to_string(static_cast<int>(category)));
}

AssetImage generate_asset(Category category, PatternKind pattern, float base, int h, int w,
                          std::uint64_t seed) {
  if (h < 4 || w < 4) {
    throw ParameterError("generate_asset: size must be at least 4x4, got " + std::to_string(h) +
                         "x" + std::to_string(w));
  }
  if (base < 0.0f || base > 1.0f) {
    throw ParameterError("generate_asset: base must lie in [0,1]");
  }
  AssetImage asset;
  asset.category = category;
  asset.pattern = pattern;
  asset.base = base;
  asset.height = h;
  asset.width = w;
  asset.seed = seed;
  asset.pixels = Tensor::full({h, w, 1}, 1.0f);
  asset.mask = Tensor({h, w});

  const auto [r0, c0, mh, mw] = category_mask_rect(category, h, w);
  for (int r = 0; r < mh; ++r) {
    for (int c = 0; c < mw; ++c) {
      asset.mask(r0 + r, c0 + c) = 1.0f;
      asset.pixels.data()[(r0 + r) * w + (c0 + c)] = pattern_value(pattern, base, r0 + r, c0 + c);
    }
  }
  return asset;
}

}  // namespace composer
