#pragma once

#include <filesystem>

#include "composer/tensor.hpp"

namespace composer {

// TENSORv1 file format: one ASCII header line
//   TENSORv1 <ndim> <d0> <d1> ...
// terminated by '\n', followed by a little-endian f32 payload of
// product(shape) values. Round trips are bit-exact.

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255). Pixel values are clamped to [0,1] and
// quantized with round-to-nearest.
void save_pgm(const Tensor& image_hw1, const std::filesystem::path& path);
Tensor load_pgm(const std::filesystem::path& path);

}  // namespace composer
