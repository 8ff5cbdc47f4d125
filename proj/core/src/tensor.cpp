#include "composer/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "composer/errors.hpp"

namespace composer {

namespace {

std::int64_t product(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 1) throw DimensionError("tensor dims must be >= 1, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

void require_2d(const Tensor& t, const char* what) {
  if (t.ndim() != 2) {
    throw DimensionError(std::string(what) + ": expected 2-D tensor, got " + shape_str(t.shape()));
  }
}

}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(product(shape_)), 0.0f) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<std::int64_t>(data_.size()) != product(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = value;
  return t;
}

Tensor Tensor::identity(int n) {
  Tensor t({n, n});
  for (int i = 0; i < n; ++i) t(i, i) = 1.0f;
  return t;
}

int Tensor::rows() const {
  if (ndim() != 2) throw DimensionError("rows(): tensor is " + shape_str(shape_));
  return shape_[0];
}

int Tensor::cols() const {
  if (ndim() != 2) throw DimensionError("cols(): tensor is " + shape_str(shape_));
  return shape_[1];
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul lhs");
  require_2d(b, "matmul rhs");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dims differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (int t = 0; t < k; ++t) acc += a(i, t) * b(t, j);
      out(i, j) = acc;
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  Tensor out({a.cols(), a.rows()});
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  require_2d(a, "softmax_rows");
  const int m = a.rows(), n = a.cols();
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    float mx = a(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, a(i, j));
    float denom = 0.0f;
    for (int j = 0; j < n; ++j) {
      const float e = std::exp(a(i, j) - mx);
      out(i, j) = e;
      denom += e;
    }
    for (int j = 0; j < n; ++j) out(i, j) /= denom;
  }
  return out;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  require_2d(q, "attention q");
  require_2d(k, "attention k");
  require_2d(v, "attention v");
  if (q.cols() != k.cols()) {
    throw DimensionError("attention: q dim " + shape_str(q.shape()) + " vs k " +
                         shape_str(k.shape()));
  }
  if (k.rows() != v.rows()) {
    throw DimensionError("attention: k rows " + shape_str(k.shape()) + " vs v " +
                         shape_str(v.shape()));
  }
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(q.cols()));
  Tensor scores = matmul(q, transpose(k));
  for (auto& s : scores.raw()) s *= inv_sqrt_d;
  return matmul(softmax_rows(scores), v);
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::int64_t i = 0; i < out.numel(); ++i) out.data()[i] += b.data()[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::int64_t i = 0; i < out.numel(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::int64_t i = 0; i < out.numel(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

Tensor scale(const Tensor& a, float s) {
  Tensor out = a;
  for (auto& v : out.raw()) v *= s;
  return out;
}

float gelu_scalar(float x) {
  // tanh approximation; smooth everywhere.
  const float c = 0.7978845608028654f;  // sqrt(2/pi)
  const float u = c * (x + 0.044715f * x * x * x);
  return 0.5f * x * (1.0f + std::tanh(u));
}

float gelu_grad_scalar(float x) {
  const float c = 0.7978845608028654f;
  const float u = c * (x + 0.044715f * x * x * x);
  const float t = std::tanh(u);
  const float du = c * (1.0f + 3.0f * 0.044715f * x * x);
  return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * du;
}

Tensor gelu(const Tensor& a) {
  Tensor out = a;
  for (auto& v : out.raw()) v = gelu_scalar(v);
  return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_2d(a, "concat_rows lhs");
  require_2d(b, "concat_rows rhs");
  if (a.cols() != b.cols()) {
    throw DimensionError("concat_rows: col mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out({a.rows() + b.rows(), a.cols()});
  std::memcpy(out.data(), a.data(), sizeof(float) * static_cast<size_t>(a.numel()));
  std::memcpy(out.data() + a.numel(), b.data(), sizeof(float) * static_cast<size_t>(b.numel()));
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw DimensionError("concat_channels: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
  std::memcpy(out.data(), a.data(), sizeof(float) * static_cast<size_t>(a.numel()));
  std::memcpy(out.data() + a.numel(), b.data(), sizeof(float) * static_cast<size_t>(b.numel()));
  return out;
}

Tensor space_to_depth(const Tensor& x) {
  if (x.ndim() != 3) throw DimensionError("space_to_depth: expected [C,H,W], got " + shape_str(x.shape()));
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw DimensionError("space_to_depth: dims not divisible by 2, " + shape_str(x.shape()));
  }
  Tensor out({c * 4, h / 2, w / 2});
  for (int ch = 0; ch < c; ++ch)
    for (int r = 0; r < h / 2; ++r)
      for (int col = 0; col < w / 2; ++col)
        for (int dr = 0; dr < 2; ++dr)
          for (int dc = 0; dc < 2; ++dc)
            out(ch * 4 + dr * 2 + dc, r, col) = x(ch, r * 2 + dr, col * 2 + dc);
  return out;
}

Tensor depth_to_space(const Tensor& x) {
  if (x.ndim() != 3) throw DimensionError("depth_to_space: expected [C,H,W], got " + shape_str(x.shape()));
  const int c4 = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (c4 % 4 != 0) {
    throw DimensionError("depth_to_space: channels not divisible by 4, " + shape_str(x.shape()));
  }
  Tensor out({c4 / 4, h * 2, w * 2});
  for (int ch = 0; ch < c4 / 4; ++ch)
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col)
        for (int dr = 0; dr < 2; ++dr)
          for (int dc = 0; dc < 2; ++dc)
            out(ch, r * 2 + dr, col * 2 + dc) = x(ch * 4 + dr * 2 + dc, r, col);
  return out;
}

float sum(const Tensor& a) {
  float acc = 0.0f;
  for (float v : a.raw()) acc += v;
  return acc;
}

float mean(const Tensor& a) {
  if (a.numel() == 0) return 0.0f;
  return sum(a) / static_cast<float>(a.numel());
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  float mx = 0.0f;
  for (std::int64_t i = 0; i < a.numel(); ++i) mx = std::max(mx, std::fabs(a.data()[i] - b.data()[i]));
  return mx;
}

float mean_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mean_abs_diff");
  if (a.numel() == 0) return 0.0f;
  float acc = 0.0f;
  for (std::int64_t i = 0; i < a.numel(); ++i) acc += std::fabs(a.data()[i] - b.data()[i]);
  return acc / static_cast<float>(a.numel());
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<size_t>(a.numel())) == 0;
}

}  // namespace composer
