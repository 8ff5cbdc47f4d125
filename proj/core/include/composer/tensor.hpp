#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace composer {

/// Dense row-major f32 tensor. The substrate for all math in this project.
///
/// Invariants: data().size() == product(shape()) at all times; every public
/// operation keeps values finite given finite inputs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor full(std::vector<int> shape, float value);
  static Tensor identity(int n);

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& raw() { return data_; }
  const std::vector<float>& raw() const { return data_; }

  // 2-D accessors (rows x cols).
  int rows() const;
  int cols() const;
  float& operator()(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
  float operator()(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

  // 3-D accessors, first index slowest (e.g. channel-major [C,H,W]).
  float& operator()(int a, int b, int c) {
    return data_[(static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  float operator()(int a, int b, int c) const {
    return data_[(static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

std::string shape_str(const std::vector<int>& shape);

// --- Linear algebra kernels -------------------------------------------------
// All kernels are pure functions with a deterministic accumulation order
// (row-major, left to right), so results are bit-reproducible across runs.

/// Standard matrix product of [m x k] by [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

/// Row-wise softmax with per-row max subtraction.
Tensor softmax_rows(const Tensor& a);

/// softmax(q k^T / sqrt(d)) v with q [m x d], k,v [p x d].
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

// --- Elementwise and structural helpers -------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor gelu(const Tensor& a);
float gelu_scalar(float x);
float gelu_grad_scalar(float x);

/// Stack b's rows below a's rows; both [? x n].
Tensor concat_rows(const Tensor& a, const Tensor& b);

/// Concatenate along the channel axis of [C,H,W] tensors.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// [C,H,W] -> [4C,H/2,W/2]; output channel = c*4 + (dr*2+dc) for the
/// sub-pixel at row offset dr, col offset dc. Exact permutation of values.
Tensor space_to_depth(const Tensor& x);

/// Exact inverse of space_to_depth.
Tensor depth_to_space(const Tensor& x);

float sum(const Tensor& a);
float mean(const Tensor& a);
float max_abs_diff(const Tensor& a, const Tensor& b);
float mean_abs_diff(const Tensor& a, const Tensor& b);
bool bit_equal(const Tensor& a, const Tensor& b);

}  // namespace composer
