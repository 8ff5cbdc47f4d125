#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "composer/dataset.hpp"
#include "composer/errors.hpp"
#include "composer/tensor_io.hpp"
#include "doctest.h"

using namespace composer;

namespace {

using UVTriple = std::tuple<int, float, float>;

std::multiset<UVTriple> part_uv_set(const UVMap& uv, std::initializer_list<Part> parts) {
  std::multiset<UVTriple> out;
  for (size_t i = 0; i < uv.part.size(); ++i) {
    for (Part p : parts) {
      if (uv.part[i] == static_cast<int>(p)) out.insert({uv.part[i], uv.u[i], uv.v[i]});
    }
  }
  return out;
}

std::map<std::string, std::string> read_dir_bytes(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    files[entry.path().lexically_relative(dir).string()] = std::move(bytes);
  }
  return files;
}

}  // namespace

TEST_CASE("figure rasterization is deterministic") {
  const FigureParams params = default_figure(64, 48);
  auto [img1, uv1] = generate_figure(params, 64, 48);
  auto [img2, uv2] = generate_figure(params, 64, 48);
  CHECK(bit_equal(img1, img2));
  CHECK(uv1.u == uv2.u);
  CHECK(uv1.v == uv2.v);
  CHECK(uv1.part == uv2.part);
}

TEST_CASE("arm angle change keeps the (part,u,v) set fixed") {
  FigureParams a = default_figure(64, 48);
  FigureParams b = a;
  b.arm_angle_l += 0.5236f;  // 30 degrees
  b.arm_angle_r -= 0.3f;
  auto [img_a, uv_a] = generate_figure(a, 64, 48);
  auto [img_b, uv_b] = generate_figure(b, 64, 48);
  CHECK(part_uv_set(uv_a, {Part::kArmL, Part::kArmR}) ==
        part_uv_set(uv_b, {Part::kArmL, Part::kArmR}));
  // All parts, not just arms: the full multiset is pose-invariant.
  const auto all = {Part::kHead, Part::kTorso, Part::kArmL, Part::kArmR,
                    Part::kLegL, Part::kLegR, Part::kFootL, Part::kFootR};
  std::multiset<UVTriple> set_a, set_b;
  for (Part p : all) {
    auto sa = part_uv_set(uv_a, {p});
    auto sb = part_uv_set(uv_b, {p});
    CHECK(sa == sb);
  }
}

TEST_CASE("head radius zero leaves no face pixels") {
  FigureParams p = default_figure(64, 48);
  p.head_radius = 0;
  FigureRaster raster = rasterize_figure(p, 64, 48);
  CHECK(raster.part_pixels[static_cast<int>(Part::kHead)].empty());
}

TEST_CASE("uv samples are injective within each part") {
  const FigureRaster raster = rasterize_figure(default_figure(64, 48), 64, 48);
  const UVMap& uv = raster.uv;
  for (int part = 1; part < kPartCount; ++part) {
    std::set<std::pair<float, float>> seen;
    for (size_t i = 0; i < uv.part.size(); ++i) {
      if (uv.part[i] != part) continue;
      CHECK(seen.insert({uv.u[i], uv.v[i]}).second);
    }
  }
}

TEST_CASE("background carries the sentinel") {
  const FigureRaster raster = rasterize_figure(default_figure(32, 24), 32, 24);
  for (size_t i = 0; i < raster.uv.part.size(); ++i) {
    if (raster.uv.part[i] == 0) {
      CHECK(raster.uv.u[i] == -1.0f);
      CHECK(raster.uv.v[i] == -1.0f);
    } else {
      CHECK(raster.uv.u[i] >= 0.0f);
      CHECK(raster.uv.u[i] <= 1.0f);
    }
  }
}

TEST_CASE("figure out of canvas raises a parameter error") {
  FigureParams p = default_figure(64, 48);
  p.anchor_row = 60;  // legs run off the bottom
  CHECK_THROWS_AS(rasterize_figure(p, 64, 48), ParameterError);
}

TEST_CASE("uv map tensor round trip") {
  const FigureRaster raster = rasterize_figure(default_figure(64, 48), 64, 48);
  const UVMap back = UVMap::from_tensor(raster.uv.to_tensor());
  CHECK(back.u == raster.uv.u);
  CHECK(back.v == raster.uv.v);
  CHECK(back.part == raster.uv.part);
}

TEST_CASE("uv downsample samples cell centers") {
  const FigureRaster raster = rasterize_figure(default_figure(64, 48), 64, 48);
  const UVMap down = raster.uv.downsample(16, 12);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 12; ++c) {
      const int src = raster.uv.idx(r * 4 + 2, c * 4 + 2);
      CHECK(down.part[static_cast<size_t>(down.idx(r, c))] == raster.uv.part[static_cast<size_t>(src)]);
      CHECK(down.u[static_cast<size_t>(down.idx(r, c))] == raster.uv.u[static_cast<size_t>(src)]);
    }
  }
}

TEST_CASE("solid pattern fills masked pixels with the base value") {
  const AssetImage a = generate_asset(Category::kUpper, PatternKind::kSolid, 0.2f, 8, 8, 1);
  int masked = 0;
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      if (a.mask(r, c) != 0.0f) {
        CHECK(a.pixels(r, c, 0) == 0.2f);
        ++masked;
      } else {
        CHECK(a.pixels(r, c, 0) == 1.0f);
      }
    }
  }
  CHECK(masked > 0);
}

TEST_CASE("stripes alternate in blocks of two rows") {
  const AssetImage a = generate_asset(Category::kLower, PatternKind::kStripes, 0.3f, 12, 8, 1);
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 8; ++c) {
      if (a.mask(r, c) == 0.0f) continue;
      const float expected = (r / 2) % 2 == 0 ? 0.3f : 0.7f;
      CHECK(a.pixels(r, c, 0) == expected);
    }
  }
}

TEST_CASE("asset generation is deterministic and validates input") {
  const AssetImage a = generate_asset(Category::kShoes, PatternKind::kDots, 0.4f, 8, 10, 77);
  const AssetImage b = generate_asset(Category::kShoes, PatternKind::kDots, 0.4f, 8, 10, 77);
  CHECK(bit_equal(a.pixels, b.pixels));
  CHECK(bit_equal(a.mask, b.mask));
  CHECK_THROWS_AS(generate_asset(Category::kUpper, PatternKind::kSolid, 0.2f, 3, 8, 0),
                  ParameterError);
  CHECK_THROWS_AS(pattern_from_name("plaid"), ParameterError);
}

TEST_CASE("caption grammar produces one span per asset") {
  const AssetImage upper = generate_asset(Category::kUpper, PatternKind::kStripes, 0.2f, 8, 8, 0);
  const TextPrompt p = caption_sample({upper});
  CHECK(p.text() == "a striped dark upper");
  REQUIRE(p.spans.size() == 1);
  CHECK(p.spans[0].asset_index == 0);
  CHECK(p.spans[0].start == 0);
  CHECK(p.spans[0].end == 4);
}

TEST_CASE("caption of empty asset list is empty") {
  const TextPrompt p = caption_sample({});
  CHECK(p.tokens.empty());
  CHECK(p.spans.empty());
}

TEST_CASE("caption orders spans by asset and keeps them disjoint") {
  const AssetImage upper = generate_asset(Category::kUpper, PatternKind::kSolid, 0.1f, 8, 8, 0);
  const AssetImage lower = generate_asset(Category::kLower, PatternKind::kDots, 0.4f, 8, 8, 0);
  const TextPrompt p = caption_sample({upper, lower});
  REQUIRE(p.spans.size() == 2);
  CHECK(p.spans[0].end <= p.spans[1].start);
  CHECK(p.spans[0].asset_index == 0);
  CHECK(p.spans[1].asset_index == 1);
  // Spans partition: each token belongs to at most one span; the comma to none.
  std::vector<int> owner(p.tokens.size(), -1);
  for (const auto& s : p.spans) {
    for (int i = s.start; i < s.end; ++i) {
      CHECK(owner[static_cast<size_t>(i)] == -1);
      owner[static_cast<size_t>(i)] = s.asset_index;
    }
  }
  CHECK_THROWS_AS(caption_sample({upper, upper}), ParameterError);
}

TEST_CASE("vocabulary is closed and distinct") {
  std::set<std::string> words;
  for (const char* w : kVocabulary) words.insert(w);
  CHECK(words.size() == 64);
  CHECK_THROWS_AS(word_id("zebra"), ParameterError);
}

TEST_CASE("dataset generation is byte-identical across runs") {
  const auto base = std::filesystem::temp_directory_path() / "composer_dataset_test";
  std::filesystem::remove_all(base);
  DatasetConfig cfg;
  cfg.count = 2;
  cfg.canvas_h = 64;
  cfg.canvas_w = 48;
  cfg.seed = 7;
  generate_dataset(cfg, base / "a");
  generate_dataset(cfg, base / "b");
  const auto a = read_dir_bytes(base / "a");
  const auto b = read_dir_bytes(base / "b");
  CHECK(a.size() == b.size());
  CHECK(a == b);
  std::filesystem::remove_all(base);
}

TEST_CASE("dataset round trip preserves samples and invariants") {
  const auto dir = std::filesystem::temp_directory_path() / "composer_dataset_roundtrip";
  std::filesystem::remove_all(dir);
  DatasetConfig cfg;
  cfg.count = 8;
  cfg.canvas_h = 64;
  cfg.canvas_w = 48;
  cfg.categories = {Category::kUpper, Category::kLower, Category::kFace};
  cfg.seed = 21;
  generate_dataset(cfg, dir);
  const auto samples = load_dataset(dir);
  REQUIRE(samples.size() == 8);
  for (int i = 0; i < 8; ++i) {
    const DatasetSample fresh = make_sample(cfg, i);
    CHECK(bit_equal(samples[static_cast<size_t>(i)].target, fresh.target));
    CHECK(samples[static_cast<size_t>(i)].prompt.tokens == fresh.prompt.tokens);
    CHECK(samples[static_cast<size_t>(i)].composition.placements.size() == 3);
    // Masks pairwise disjoint.
    const auto& masks = samples[static_cast<size_t>(i)].composition.masks;
    for (size_t x = 0; x < masks.size(); ++x) {
      for (size_t y = x + 1; y < masks.size(); ++y) {
        for (std::int64_t px = 0; px < masks[x].numel(); ++px) {
          CHECK((masks[x].data()[px] == 0.0f || masks[y].data()[px] == 0.0f));
        }
      }
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("dressed torso equals the asset pattern resampled to its bbox") {
  DatasetConfig cfg;
  cfg.count = 1;
  cfg.canvas_h = 64;
  cfg.canvas_w = 48;
  cfg.seed = 5;
  const DatasetSample s = make_sample(cfg, 0);
  const FigureRaster raster = rasterize_figure(s.figure, 64, 48);

  const AssetImage* upper = nullptr;
  for (const auto& a : s.assets) {
    if (a.category == Category::kUpper) upper = &a;
  }
  REQUIRE(upper != nullptr);

  // Independent oracle: recompute the nearest resample of the mask rect.
  const auto& torso = raster.part_pixels[static_cast<int>(Part::kTorso)];
  int r0 = 1 << 20, r1 = -1, c0 = 1 << 20, c1 = -1;
  for (const auto& [r, c] : torso) {
    r0 = std::min(r0, r);
    r1 = std::max(r1, r);
    c0 = std::min(c0, c);
    c1 = std::max(c1, c);
  }
  const auto [mr, mc, mh, mw] = category_mask_rect(upper->category, upper->height, upper->width);
  for (const auto& [r, c] : torso) {
    const int src_r = mr + (r - r0) * mh / (r1 - r0 + 1);
    const int src_c = mc + (c - c0) * mw / (c1 - c0 + 1);
    CHECK(s.target.data()[r * 48 + c] ==
          pattern_value(upper->pattern, upper->base, src_r, src_c));
  }
}

TEST_CASE("default figures fit common canvases") {
  for (auto [h, w] : {std::pair{64, 48}, {32, 24}, {48, 32}}) {
    CHECK_NOTHROW(rasterize_figure(default_figure(h, w), h, w));
  }
}
