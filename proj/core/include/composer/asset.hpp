#pragma once

#include <cstdint>

#include "composer/figure.hpp"
#include "composer/tensor.hpp"

namespace composer {

enum class PatternKind : int { kSolid = 0, kStripes = 1, kChecker = 2, kDots = 3 };
inline constexpr int kPatternCount = 4;

const char* pattern_name(PatternKind p);
PatternKind pattern_from_name(const std::string& name);

/// Pattern grayscale at pixel (r, c); pure in (pattern, base, r, c).
/// stripes: rows alternate base / 1-base in blocks of 2 (period 4).
/// checker: 2x2 cells. dots: base dots on a 1-base ground, 4x4 cells.
float pattern_value(PatternKind pattern, float base, int r, int c);

/// One reference element of a composition: an h x w grayscale patch whose
/// mask is a category-shaped rectangle; pixels outside the mask are exactly
/// white (1.0).
struct AssetImage {
  Category category = Category::kUpper;
  PatternKind pattern = PatternKind::kSolid;
  float base = 0.5f;
  int height = 0;
  int width = 0;
  Tensor pixels;  // [h, w, 1]
  Tensor mask;    // [h, w], values 0/1
  std::uint64_t seed = 0;
};

/// Deterministic render; the seed is carried through for provenance but the
/// pixels depend only on (category, pattern, base, h, w).
AssetImage generate_asset(Category category, PatternKind pattern, float base, int h, int w,
                          std::uint64_t seed);

/// The category's mask rectangle inside an h x w patch, as (r0, c0, mh, mw).
std::array<int, 4> category_mask_rect(Category category, int h, int w);

}  // namespace composer
