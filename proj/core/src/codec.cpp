#include "composer/codec.hpp"

#include "composer/errors.hpp"

namespace composer {

Tensor LatentCodec::encode(const Tensor& image) const {
  if (image.ndim() != 3 || image.dim(2) != 1) {
    throw DimensionError("codec encode: expected [H,W,1], got " + shape_str(image.shape()));
  }
  const int h = image.dim(0), w = image.dim(1);
  if (h % kFactor != 0 || w % kFactor != 0) {
    throw DimensionError("codec encode: dims must be divisible by " + std::to_string(kFactor) +
                         ", got " + shape_str(image.shape()));
  }
  // Reinterpret [H,W,1] as [1,H,W] (same layout), then space-to-depth.
  return space_to_depth(Tensor({1, h, w}, image.raw()));
}

Tensor LatentCodec::decode(const Tensor& latent) const {
  if (latent.ndim() != 3 || latent.dim(0) != kLatentChannels) {
    throw DimensionError("codec decode: expected [4,h,w], got " + shape_str(latent.shape()));
  }
  Tensor img = depth_to_space(latent);  // [1, H, W]
  return Tensor({img.dim(1), img.dim(2), 1}, img.raw());
}

}  // namespace composer
