#include "composer/compose.hpp"

#include "composer/errors.hpp"
#include "composer/rng.hpp"

namespace composer {

namespace {

bool rects_intersect(const Placement& a, const Placement& b) {
  return a.row < b.row + b.height && b.row < a.row + a.height && a.col < b.col + b.width &&
         b.col < a.col + a.width;
}

std::vector<Placement> shelf_pack(const std::vector<AssetImage>& assets, int canvas_h,
                                  int canvas_w) {
  std::vector<Placement> placements;
  int row = 0, col = 0, shelf_h = 0;
  for (size_t i = 0; i < assets.size(); ++i) {
    const int h = assets[i].height, w = assets[i].width;
    if (w > canvas_w || h > canvas_h) {
      throw CapacityError("asset " + std::to_string(i) + " (" + std::to_string(h) + "x" +
                          std::to_string(w) + ") exceeds the canvas");
    }
    if (col + w > canvas_w) {
      row += shelf_h;
      col = 0;
      shelf_h = 0;
    }
    if (row + h > canvas_h) {
      throw CapacityError("assets do not fit on the canvas even with shelf packing");
    }
    placements.push_back({static_cast<int>(i), row, col, h, w});
    col += w;
    shelf_h = std::max(shelf_h, h);
  }
  return placements;
}

}  // namespace

AssetComposition compose_assets(const std::vector<AssetImage>& assets, int canvas_h, int canvas_w,
                                std::uint64_t seed) {
  if (canvas_h < 1 || canvas_w < 1) throw ParameterError("compose_assets: empty canvas");

  std::vector<Placement> placements;
  bool rejection_ok = true;
  Rng rng = Rng(seed).derive("compose");
  for (size_t i = 0; i < assets.size() && rejection_ok; ++i) {
    const int h = assets[i].height, w = assets[i].width;
    if (h > canvas_h || w > canvas_w) {
      throw CapacityError("asset " + std::to_string(i) + " (" + std::to_string(h) + "x" +
                          std::to_string(w) + ") exceeds the canvas");
    }
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      Placement cand{static_cast<int>(i), rng.uniform_int(0, canvas_h - h),
                     rng.uniform_int(0, canvas_w - w), h, w};
      bool clash = false;
      for (const auto& p : placements) {
        if (rects_intersect(cand, p)) {
          clash = true;
          break;
        }
      }
      if (!clash) {
        placements.push_back(cand);
        placed = true;
      }
    }
    if (!placed) rejection_ok = false;
  }
  if (!rejection_ok) placements = shelf_pack(assets, canvas_h, canvas_w);

  AssetComposition comp;
  comp.height = canvas_h;
  comp.width = canvas_w;
  comp.canvas = Tensor::full({canvas_h, canvas_w, 1}, 1.0f);
  comp.masks.reserve(assets.size());
  comp.placements = std::move(placements);
  for (size_t i = 0; i < assets.size(); ++i) {
    const Placement& p = comp.placements[i];
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

Tensor downsample_mask(const Tensor& mask, int out_h, int out_w, float threshold) {
  if (mask.ndim() != 2) {
    throw DimensionError("downsample_mask: expected [H,W], got " + shape_str(mask.shape()));
  }
  const int h = mask.dim(0), w = mask.dim(1);
  if (out_h < 1 || out_w < 1 || h % out_h != 0 || w % out_w != 0) {
    throw DimensionError("downsample_mask: " + std::to_string(h) + "x" + std::to_string(w) +
                         " -> " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                         " is not an integer ratio");
  }
  const int fr = h / out_h, fc = w / out_w;
  const double cell_area = static_cast<double>(fr) * fc;
  Tensor out({out_h, out_w});
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      int on = 0;
      for (int i = 0; i < fr; ++i)
        for (int j = 0; j < fc; ++j)
          if (mask(r * fr + i, c * fc + j) != 0.0f) ++on;
      if (static_cast<double>(on) >= static_cast<double>(threshold) * cell_area) out(r, c) = 1.0f;
    }
  }
  return out;
}

std::vector<TokenSelection> token_selection(const AssetComposition& composition,
                                            const std::vector<BlockDims>& blocks,
                                            float threshold) {
  std::vector<TokenSelection> selections;
  selections.reserve(blocks.size());
  for (const BlockDims& block : blocks) {
    TokenSelection sel;
    sel.block_id = block.block_id;
    sel.height = block.height;
    sel.width = block.width;
    for (const Tensor& mask : composition.masks) {
      Tensor down = downsample_mask(mask, block.height, block.width, threshold);
      std::vector<int> tokens;
      for (int r = 0; r < block.height; ++r)
        for (int c = 0; c < block.width; ++c)
          if (down(r, c) != 0.0f) tokens.push_back(r * block.width + c);
      sel.asset_tokens.push_back(std::move(tokens));
    }
    selections.push_back(std::move(sel));
  }
  return selections;
}

}  // namespace composer
