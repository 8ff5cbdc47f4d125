#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "composer/tensor.hpp"

namespace composer::ad {

// Reverse-mode tape over value-semantic tensors. Forward values are computed
// by the same kernels used everywhere else (tensor.hpp), so a graph forward
// is bit-identical to the plain kernel path. Node creation order is a valid
// topological order; backward walks it in reverse, which keeps gradient
// accumulation deterministic.

struct Var;
using VarPtr = std::shared_ptr<Var>;

struct Var {
  Tensor value;
  Tensor grad;  // allocated on first use, same shape as value
  bool requires_grad = false;
  std::vector<VarPtr> parents;
  std::function<void(Var&)> backward_fn;
  std::int64_t order = 0;
  // Float64 shadow of `value`, maintained only in dual-precision mode.
  std::shared_ptr<std::vector<double>> dvalue;

  Tensor& ensure_grad();
};

/// Dual-precision mode (thread-local): ops additionally evaluate in float64
/// on exactly widened inputs. Finite-difference checks read the float64
/// objective, which keeps the f32 rounding floor out of the differences.
void set_dual_precision(bool enabled);
bool dual_precision_enabled();

/// Scalar objective value: float64 in dual mode, widened f32 otherwise.
double scalar_value(const VarPtr& v);

VarPtr constant(Tensor value);
VarPtr leaf(Tensor value, bool requires_grad);

VarPtr matmul(const VarPtr& a, const VarPtr& b);
VarPtr transpose(const VarPtr& a);
VarPtr add(const VarPtr& a, const VarPtr& b);
VarPtr sub(const VarPtr& a, const VarPtr& b);
VarPtr scale(const VarPtr& a, float s);
VarPtr softmax_rows(const VarPtr& a);
VarPtr gelu(const VarPtr& a);
VarPtr reshape(const VarPtr& a, std::vector<int> shape);
VarPtr concat_rows(const VarPtr& a, const VarPtr& b);
VarPtr space_to_depth(const VarPtr& a);
VarPtr depth_to_space(const VarPtr& a);

/// x [n x d] plus a bias row [1 x d] broadcast over all rows.
VarPtr add_row_broadcast(const VarPtr& x, const VarPtr& row);

/// x [n x d] times a gain row [1 x d], broadcast over all rows.
VarPtr mul_row_broadcast(const VarPtr& x, const VarPtr& row);

/// base [n x d] with `vec` [1 x d] added to each listed row index.
VarPtr scatter_add_rows(const VarPtr& base, const VarPtr& vec, std::vector<int> rows);

/// softmax(q k^T / sqrt(d)) v, composed from the primitives above.
VarPtr scaled_dot_attention(const VarPtr& q, const VarPtr& k, const VarPtr& v);

/// Mean squared error against a constant target; output shape [1].
VarPtr mse(const VarPtr& pred, const Tensor& target);

/// Seeds d(loss)/d(loss) = 1 and runs all backward functions in reverse
/// creation order. `loss` must be a scalar (numel == 1).
void backward(const VarPtr& loss);

}  // namespace composer::ad
