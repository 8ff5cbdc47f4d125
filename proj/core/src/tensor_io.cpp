#include "composer/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "composer/errors.hpp"

namespace composer {

namespace {

// Serialize f32 as 4 little-endian bytes regardless of host order.
void put_f32_le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(64 + static_cast<size_t>(t.numel()) * 4);
  buf += "TENSORv1 " + std::to_string(t.ndim());
  for (int i = 0; i < t.ndim(); ++i) buf += " " + std::to_string(t.dim(i));
  buf += "\n";
  for (std::int64_t i = 0; i < t.numel(); ++i) put_f32_le(buf, t.data()[i]);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw IoError("missing TENSORv1 header: " + path.string());
  std::istringstream hs(header);
  std::string magic;
  int ndim = 0;
  hs >> magic >> ndim;
  if (magic != "TENSORv1" || !hs || ndim < 0) {
    throw IoError("bad TENSORv1 header in " + path.string() + ": '" + header + "'");
  }
  std::vector<int> shape(static_cast<size_t>(ndim));
  for (int i = 0; i < ndim; ++i) {
    if (!(hs >> shape[static_cast<size_t>(i)])) {
      throw IoError("truncated TENSORv1 header in " + path.string());
    }
  }
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<unsigned char> payload(static_cast<size_t>(n) * 4);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (in.gcount() != static_cast<std::streamsize>(payload.size())) {
    throw IoError("truncated TENSORv1 payload in " + path.string());
  }
  std::vector<float> data(static_cast<size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) data[static_cast<size_t>(i)] = get_f32_le(&payload[static_cast<size_t>(i) * 4]);
  return Tensor(std::move(shape), std::move(data));
}

void save_pgm(const Tensor& image, const std::filesystem::path& path) {
  if (image.ndim() != 2 && !(image.ndim() == 3 && image.dim(2) == 1)) {
    throw DimensionError("save_pgm: expected [H,W] or [H,W,1], got " + shape_str(image.shape()));
  }
  const int h = image.dim(0), w = image.dim(1);
  std::string buf = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i) {
    float v = image.data()[i];
    v = std::min(1.0f, std::max(0.0f, v));
    buf.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Tensor load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w < 1 || h < 1 || maxval != 255) {
    throw IoError("unsupported PGM in " + path.string());
  }
  in.get();  // single whitespace after maxval
  std::vector<unsigned char> pixels(static_cast<size_t>(w) * static_cast<size_t>(h));
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size())) {
    throw IoError("truncated PGM payload in " + path.string());
  }
  Tensor img({h, w, 1});
  for (size_t i = 0; i < pixels.size(); ++i) img.data()[i] = static_cast<float>(pixels[i]) / 255.0f;
  return img;
}

}  // namespace composer
