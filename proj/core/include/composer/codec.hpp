#pragma once

#include "composer/tensor.hpp"

namespace composer {

/// Invertible toy latent codec: space-to-depth with factor 2 on grayscale
/// images. [H, W, 1] -> [4, H/2, W/2]; decode is the exact inverse and the
/// round trip is bit-exact, so latent-space edits map 1:1 to 2x2 pixel
/// blocks.
struct LatentCodec {
  static constexpr int kFactor = 2;
  static constexpr int kImageChannels = 1;
  static constexpr int kLatentChannels = 4;

  Tensor encode(const Tensor& image_hw1) const;
  Tensor decode(const Tensor& latent_chw) const;

  int latent_h(int image_h) const { return image_h / kFactor; }
  int latent_w(int image_w) const { return image_w / kFactor; }
};

}  // namespace composer
