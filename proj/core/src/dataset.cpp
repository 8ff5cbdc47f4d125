#include "composer/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "composer/errors.hpp"
#include "composer/rng.hpp"
#include "composer/tensor_io.hpp"
#include "json.hpp"

namespace composer {

std::pair<int, int> asset_size_for(Category category, int canvas_h, int canvas_w) {
  switch (category) {
    case Category::kUpper:
      return {canvas_h / 4, canvas_w / 3};
    case Category::kLower:
      return {canvas_h / 3, canvas_w / 4};
    case Category::kShoes:
      return {std::max(4, canvas_h / 8), canvas_w / 4};
    case Category::kFace:
      return {std::max(4, canvas_h / 6), std::max(4, canvas_w / 6)};
  }
  throw ParameterError("unknown category");
}

Tensor dressed_render(const FigureRaster& raster, const std::vector<AssetImage>& assets) {
  const int h = raster.uv.height, w = raster.uv.width;
  Tensor img = Tensor::full({h, w, 1}, 1.0f);

  const AssetImage* by_category[kCategoryCount] = {nullptr, nullptr, nullptr, nullptr};
  for (const auto& a : assets) by_category[static_cast<int>(a.category)] = &a;

  for (int part_id = 1; part_id < kPartCount; ++part_id) {
    const auto& pixels = raster.part_pixels[static_cast<size_t>(part_id)];
    if (pixels.empty()) continue;

    const AssetImage* asset = nullptr;
    if (auto cat = category_for_part(static_cast<Part>(part_id))) {
      asset = by_category[static_cast<int>(*cat)];
    }
    if (asset == nullptr) {
      for (const auto& [r, c] : pixels) img.data()[r * w + c] = kSkinTone;
      continue;
    }

    int r0 = pixels[0].first, r1 = pixels[0].first;
    int c0 = pixels[0].second, c1 = pixels[0].second;
    for (const auto& [r, c] : pixels) {
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
    }
    const int bh = r1 - r0 + 1, bw = c1 - c0 + 1;
    const auto [mr, mc, mh, mw] = category_mask_rect(asset->category, asset->height, asset->width);
    for (const auto& [r, c] : pixels) {
      const int src_r = mr + (r - r0) * mh / bh;
      const int src_c = mc + (c - c0) * mw / bw;
      img.data()[r * w + c] = asset->pixels(src_r, src_c, 0);
    }
  }
  return img;
}

DatasetSample make_sample(const DatasetConfig& config, int index) {
  DatasetSample s;
  s.id = index;
  s.seed = mix_seed(config.seed, static_cast<std::uint64_t>(index));
  Rng rng(s.seed);

  Rng fig_rng = rng.derive("figure");
  s.figure = default_figure(config.canvas_h, config.canvas_w);
  s.figure.arm_angle_l = fig_rng.uniform(-0.1f, 0.6f);
  s.figure.arm_angle_r = fig_rng.uniform(-0.1f, 0.6f);
  s.figure.leg_angle_l = fig_rng.uniform(-0.08f, 0.35f);
  s.figure.leg_angle_r = fig_rng.uniform(-0.08f, 0.35f);

  Rng asset_rng = rng.derive("assets");
  for (Category cat : config.categories) {
    const auto [h, w] = asset_size_for(cat, config.canvas_h, config.canvas_w);
    const PatternKind pattern = static_cast<PatternKind>(asset_rng.uniform_int(0, kPatternCount - 1));
    const float base = asset_rng.uniform(0.05f, 0.45f);
    s.assets.push_back(generate_asset(cat, pattern, base, h, w, asset_rng.next_u64()));
  }

  s.composition =
      compose_assets(s.assets, config.canvas_h, config.canvas_w, rng.derive("compose").seed());
  s.prompt = caption_sample(s.assets);

  FigureRaster raster = rasterize_figure(s.figure, config.canvas_h, config.canvas_w);
  s.uv = raster.uv;
  s.target = dressed_render(raster, s.assets);
  return s;
}

AssetComposition composition_from_placements(const std::vector<AssetImage>& assets,
                                             const std::vector<Placement>& placements,
                                             int canvas_h, int canvas_w) {
  AssetComposition comp;
  comp.height = canvas_h;
  comp.width = canvas_w;
  comp.canvas = Tensor::full({canvas_h, canvas_w, 1}, 1.0f);
  comp.placements = placements;
  for (const Placement& p : placements) {
    const AssetImage& a = assets[static_cast<size_t>(p.asset_index)];
    Tensor mask({canvas_h, canvas_w});
    for (int r = 0; r < p.height; ++r) {
      for (int c = 0; c < p.width; ++c) {
        if (a.mask(r, c) != 0.0f) {
          mask(p.row + r, p.col + c) = 1.0f;
          comp.canvas.data()[(p.row + r) * canvas_w + (p.col + c)] = a.pixels(r, c, 0);
        }
      }
    }
    comp.masks.push_back(std::move(mask));
    comp.phrase_links.push_back(p.asset_index);
  }
  return comp;
}

namespace {

std::string sample_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%05d", index);
  return buf;
}

nlohmann::json config_to_json(const DatasetConfig& c) {
  std::vector<std::string> cats;
  for (Category cat : c.categories) cats.push_back(category_name(cat));
  return nlohmann::json{{"count", c.count},
                        {"canvas_h", c.canvas_h},
                        {"canvas_w", c.canvas_w},
                        {"categories", cats},
                        {"seed", c.seed}};
}

DatasetConfig config_from_json(const nlohmann::json& j) {
  DatasetConfig c;
  c.count = j.at("count").get<int>();
  c.canvas_h = j.at("canvas_h").get<int>();
  c.canvas_w = j.at("canvas_w").get<int>();
  c.categories.clear();
  for (const auto& name : j.at("categories")) {
    const std::string s = name.get<std::string>();
    bool found = false;
    for (int i = 0; i < kCategoryCount; ++i) {
      if (s == category_name(static_cast<Category>(i))) {
        c.categories.push_back(static_cast<Category>(i));
        found = true;
      }
    }
    if (!found) throw ParameterError("dataset config: unknown category '" + s + "'");
  }
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

nlohmann::json figure_to_json(const FigureParams& f) {
  return nlohmann::json{{"torso_height", f.torso_height},
                        {"torso_width", f.torso_width},
                        {"head_radius", f.head_radius},
                        {"arm_angle_l", f.arm_angle_l},
                        {"arm_angle_r", f.arm_angle_r},
                        {"leg_angle_l", f.leg_angle_l},
                        {"leg_angle_r", f.leg_angle_r},
                        {"anchor_row", f.anchor_row},
                        {"anchor_col", f.anchor_col},
                        {"arm_len", f.arm_len},
                        {"arm_wid", f.arm_wid},
                        {"leg_len", f.leg_len},
                        {"leg_wid", f.leg_wid},
                        {"foot_len", f.foot_len},
                        {"foot_wid", f.foot_wid}};
}

FigureParams figure_from_json(const nlohmann::json& j) {
  FigureParams f;
  f.torso_height = j.at("torso_height").get<int>();
  f.torso_width = j.at("torso_width").get<int>();
  f.head_radius = j.at("head_radius").get<int>();
  f.arm_angle_l = j.at("arm_angle_l").get<float>();
  f.arm_angle_r = j.at("arm_angle_r").get<float>();
  f.leg_angle_l = j.at("leg_angle_l").get<float>();
  f.leg_angle_r = j.at("leg_angle_r").get<float>();
  f.anchor_row = j.at("anchor_row").get<int>();
  f.anchor_col = j.at("anchor_col").get<int>();
  f.arm_len = j.at("arm_len").get<int>();
  f.arm_wid = j.at("arm_wid").get<int>();
  f.leg_len = j.at("leg_len").get<int>();
  f.leg_wid = j.at("leg_wid").get<int>();
  f.foot_len = j.at("foot_len").get<int>();
  f.foot_wid = j.at("foot_wid").get<int>();
  return f;
}

}  // namespace

void generate_dataset(const DatasetConfig& config, const std::filesystem::path& dir) {
  if (config.count < 0) throw ParameterError("generate_dataset: negative count");
  if (config.canvas_h % 8 != 0 || config.canvas_w % 8 != 0) {
    throw ParameterError("generate_dataset: canvas dims must be multiples of 8, got " +
                         std::to_string(config.canvas_h) + "x" + std::to_string(config.canvas_w));
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string());

  nlohmann::json manifest;
  manifest["config"] = config_to_json(config);
  nlohmann::json samples = nlohmann::json::array();

  for (int i = 0; i < config.count; ++i) {
    DatasetSample s = make_sample(config, i);
    const std::string stem = sample_stem(i);
    save_pgm(s.target, dir / (stem + "_image.pgm"));
    save_tensor(s.target, dir / (stem + "_image.tensor"));
    save_tensor(s.uv.to_tensor(), dir / (stem + "_uv.tensor"));

    nlohmann::json assets = nlohmann::json::array();
    for (const auto& a : s.assets) {
      assets.push_back({{"category", category_name(a.category)},
                        {"pattern", pattern_name(a.pattern)},
                        {"base", a.base},
                        {"h", a.height},
                        {"w", a.width},
                        {"seed", a.seed}});
    }
    nlohmann::json placements = nlohmann::json::array();
    for (const auto& p : s.composition.placements) {
      placements.push_back({p.asset_index, p.row, p.col, p.height, p.width});
    }
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& span : s.prompt.spans) {
      spans.push_back({span.asset_index, span.start, span.end});
    }
    samples.push_back({{"id", s.id},
                       {"image", stem + "_image.pgm"},
                       {"image_tensor", stem + "_image.tensor"},
                       {"uvmap", stem + "_uv.tensor"},
                       {"composition",
                        {{"assets", assets},
                         {"placements", placements},
                         {"phrase_links", s.composition.phrase_links}}},
                       {"prompt", {{"tokens", s.prompt.tokens}, {"spans", spans}}},
                       {"figure", figure_to_json(s.figure)},
                       {"seed", s.seed}});
  }
  manifest["samples"] = samples;

  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

std::vector<DatasetSample> load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot read manifest in " + dir.string());
  nlohmann::json manifest = nlohmann::json::parse(in);
  const DatasetConfig config = config_from_json(manifest.at("config"));

  std::vector<DatasetSample> out;
  for (const auto& entry : manifest.at("samples")) {
    DatasetSample s;
    s.id = entry.at("id").get<int>();
    s.seed = entry.at("seed").get<std::uint64_t>();
    s.figure = figure_from_json(entry.at("figure"));
    s.target = load_tensor(dir / entry.at("image_tensor").get<std::string>());
    s.uv = UVMap::from_tensor(load_tensor(dir / entry.at("uvmap").get<std::string>()));

    for (const auto& aj : entry.at("composition").at("assets")) {
      Category cat = Category::kUpper;
      const std::string cname = aj.at("category").get<std::string>();
      for (int i = 0; i < kCategoryCount; ++i) {
        if (cname == category_name(static_cast<Category>(i))) cat = static_cast<Category>(i);
      }
      s.assets.push_back(generate_asset(cat, pattern_from_name(aj.at("pattern").get<std::string>()),
                                        aj.at("base").get<float>(), aj.at("h").get<int>(),
                                        aj.at("w").get<int>(), aj.at("seed").get<std::uint64_t>()));
    }
    std::vector<Placement> placements;
    for (const auto& pj : entry.at("composition").at("placements")) {
      placements.push_back({pj.at(0).get<int>(), pj.at(1).get<int>(), pj.at(2).get<int>(),
                            pj.at(3).get<int>(), pj.at(4).get<int>()});
    }
    s.composition =
        composition_from_placements(s.assets, placements, config.canvas_h, config.canvas_w);
    s.prompt.tokens = entry.at("prompt").at("tokens").get<std::vector<int>>();
    for (const auto& sj : entry.at("prompt").at("spans")) {
      s.prompt.spans.push_back({sj.at(0).get<int>(), sj.at(1).get<int>(), sj.at(2).get<int>()});
    }
    out.push_back(std::move(s));
  }
  return out;
}

DatasetConfig load_dataset_config(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot read manifest in " + dir.string());
  nlohmann::json manifest = nlohmann::json::parse(in);
  return config_from_json(manifest.at("config"));
}

}  // namespace composer
