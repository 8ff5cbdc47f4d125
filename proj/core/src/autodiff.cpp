#include "composer/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "composer/errors.hpp"

namespace composer::ad {

namespace {

std::atomic<std::int64_t> g_order{0};
thread_local bool g_dual = false;

using DVec = std::vector<double>;
using DPtr = std::shared_ptr<DVec>;

DPtr widen(const Tensor& t) {
  auto out = std::make_shared<DVec>(static_cast<size_t>(t.numel()));
  for (std::int64_t i = 0; i < t.numel(); ++i) (*out)[static_cast<size_t>(i)] = t.data()[i];
  return out;
}

const DVec& dval(const VarPtr& v) {
  if (!v->dvalue) v->dvalue = widen(v->value);
  return *v->dvalue;
}

double dgelu(double x) {
  const double c = 0.7978845608028654;
  const double u = c * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

VarPtr make_node(Tensor value, std::vector<VarPtr> parents, std::function<void(Var&)> backward_fn,
                 const std::function<DPtr(const std::vector<VarPtr>&)>& dual_fn = nullptr) {
  auto node = std::make_shared<Var>();
  node->value = std::move(value);
  node->parents = std::move(parents);
  node->order = g_order.fetch_add(1);
  for (const auto& p : node->parents) {
    if (p->requires_grad) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) node->backward_fn = std::move(backward_fn);
  if (g_dual && dual_fn) node->dvalue = dual_fn(node->parents);
  return node;
}

}  // namespace

Tensor& Var::ensure_grad() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  return grad;
}

void set_dual_precision(bool enabled) { g_dual = enabled; }
bool dual_precision_enabled() { return g_dual; }

double scalar_value(const VarPtr& v) {
  if (v->value.numel() != 1) {
    throw DimensionError("scalar_value: tensor is " + shape_str(v->value.shape()));
  }
  if (v->dvalue) return (*v->dvalue)[0];
  return static_cast<double>(v->value.data()[0]);
}

VarPtr constant(Tensor value) { return leaf(std::move(value), false); }

VarPtr leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Var>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->order = g_order.fetch_add(1);
  if (g_dual) node->dvalue = widen(node->value);
  return node;
}

VarPtr matmul(const VarPtr& a, const VarPtr& b) {
  const int m = a->value.rows(), k = a->value.cols(), n = b->value.cols();
  return make_node(
      composer::matmul(a->value, b->value), {a, b},
      [](Var& node) {
        const auto& a = node.parents[0];
        const auto& b = node.parents[1];
        if (a->requires_grad) {
          Tensor da = composer::matmul(node.grad, composer::transpose(b->value));
          Tensor& g = a->ensure_grad();
          for (std::int64_t i = 0; i < g.numel(); ++i) g.data()[i] += da.data()[i];
        }
        if (b->requires_grad) {
          Tensor db = composer::matmul(composer::transpose(a->value), node.grad);
          Tensor& g = b->ensure_grad();
          for (std::int64_t i = 0; i < g.numel(); ++i) g.data()[i] += db.data()[i];
        }
      },
      [m, k, n](const std::vector<VarPtr>& parents) {
        const DVec& da = dval(parents[0]);
        const DVec& db = dval(parents[1]);
        auto out = std::make_shared<DVec>(static_cast<size_t>(m) * n);
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) {
              acc += da[static_cast<size_t>(i) * k + t] * db[static_cast<size_t>(t) * n + j];
            }
            (*out)[static_cast<size_t>(i) * n + j] = acc;
          }
        }
        return out;
      });
}

VarPtr transpose(const VarPtr& a) {
  const int r = a->value.rows(), c = a->value.cols();
  return make_node(
      composer::transpose(a->value), {a},
      [](Var& node) {
        const auto& a = node.parents[0];
        if (!a->requires_grad) return;
        Tensor da = composer::transpose(node.grad);
        Tensor& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g.data()[i] += da.data()[i];
      },
      [r, c](const std::vector<VarPtr>& parents) {
        const DVec& da = dval(parents[0]);
        auto out = std::make_shared<DVec>(da.size());
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j)
            (*out)[static_cast<size_t>(j) * r + i] = da[static_cast<size_t>(i) * c + j];
        return out;
      });
}

namespace {

VarPtr elementwise_binary(const VarPtr& a, const VarPtr& b, Tensor value, float sign_b) {
  return make_node(
      std::move(value), {a, b},
      [sign_b](Var& node) {
        const auto& a = node.parents[0];
        const auto& b = node.parents[1];
        if (a->requires_grad) {
          Tensor& g = a->ensure_grad();
          for (std::int64_t i = 0; i < g.numel(); ++i) g.data()[i] += node.grad.data()[i];
        }
        if (b->requires_grad) {
          Tensor& g = b->ensure_grad();
          for (std::int64_t i = 0; i < g.numel(); ++i) g.data()[i] += sign_b * node.grad.data()[i];
        }
      },
      [sign_b](const std::vector<VarPtr>& parents) {
        const DVec& da = dval(parents[0]);
        const DVec& db = dval(parents[1]);
        auto out = std::make_shared<DVec>(da.size());
        for (size_t i = 0; i < da.size(); ++i) (*out)[i] = da[i] + sign_b * db[i];
        return out;
      });
}

}  // namespace

VarPtr add(const VarPtr& a, const VarPtr& b) {
  return elementwise_binary(a, b, composer::add(a->value, b->value), 1.0f);
}

VarPtr sub(const VarPtr& a, const VarPtr& b) {
  return elementwise_binary(a, b, composer::sub(a->value, b->value), -1.0f);
}

VarPtr scale(const VarPtr& a, float s) {
  return make_node(
      composer::scale(a->value, s), {a},
      [s](Var& node) {
        const auto& a = node.parents[0];
        if (!a->requires_grad) return;
        Tensor& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g.data()[i] += s * node.grad.data()[i];
      },
      [s](const std::vector<VarPtr>& parents) {
        const DVec& da = dval(parents[0]);
        auto out = std::make_shared<DVec>(da.size());
        for (size_t i = 0; i < da.size(); ++i) (*out)[i] = da[i] * static_cast<double>(s);
        return out;
      });
}

VarPtr softmax_rows(const VarPtr& a) {
  const int m = a->value.rows(), n = a->value.cols();
  return make_node(
      composer::softmax_rows(a->value), {a},
      [](Var& node) {
        const auto& a = node.parents[0];
        if (!a->requires_grad) return;
        const Tensor& y = node.value;
        const int rows = y.rows(), cols = y.cols();
        Tensor& g = a->ensure_grad();
        for (int i = 0; i < rows; ++i) {
          float dot = 0.0f;
          for (int j = 0; j < cols; ++j) dot += node.grad(i, j) * y(i, j);
          for (int j = 0; j < cols; ++j) g(i, j) += y(i, j) * (node.grad(i, j) - dot);
        }
      },
      [m, n](const std::vector<VarPtr>& parents) {
        const DVec& da = dval(parents[0]);
        auto out = std::make_shared<DVec>(da.size());
        for (int i = 0; i < m; ++i) {
          double mx = da[static_cast<size_t>(i) * n];
          for (int j = 1; j < n; ++j) mx = std::max(mx, da[static_cast<size_t>(i) * n + j]);
          double denom = 0.0;
          for (int j = 0; j < n; ++j) {
            const double e = std::exp(da[static_cast<size_t>(i) * n + j] - mx);
            (*out)[static_cast<size_t>(i) * n + j] = e;
            denom += e;
          }
          for (int j = 0; j < n; ++j) (*out)[static_cast<size_t>(i) * n + j] /= denom;
        }
        return out;
      });
}

VarPtr gelu(const VarPtr& a) {
  return make_node(
      composer::gelu(a->value), {a},
      [](Var& node) {
        const auto& a = node.parents[0];
        if (!a->requires_grad) return;
        Tensor& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) {
          g.data()[i] += gelu_grad_scalar(a->value.data()[i]) * node.grad.data()[i];
        }
      },
      [](const std::vector<VarPtr>& parents) {
        const DVec& da = dval(parents[0]);
        auto out = std::make_shared<DVec>(da.size());
        for (size_t i = 0; i < da.size(); ++i) (*out)[i] = dgelu(da[i]);
        return out;
      });
}

namespace {

// Shared by reshape/space_to_depth/depth_to_space: float64 path just applies
// the same index permutation.
std::function<DPtr(const std::vector<VarPtr>&)> permutation_dual(std::vector<std::int64_t> perm) {
  return [perm = std::move(perm)](const std::vector<VarPtr>& parents) {
    const DVec& da = dval(parents[0]);
    auto out = std::make_shared<DVec>(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) (*out)[i] = da[static_cast<size_t>(perm[i])];
    return out;
  };
}

std::vector<std::int64_t> identity_perm(std::int64_t n) {
  std::vector<std::int64_t> perm(static_cast<size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  return perm;
}

}  // namespace

VarPtr reshape(const VarPtr& a, std::vector<int> shape) {
  Tensor v(std::move(shape), a->value.raw());
  return make_node(
      std::move(v), {a},
      [](Var& node) {
        const auto& a = node.parents[0];
        if (!a->requires_grad) return;
        Tensor& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g.data()[i] += node.grad.data()[i];
      },
      g_dual ? permutation_dual(identity_perm(a->value.numel()))
             : std::function<DPtr(const std::vector<VarPtr>&)>(nullptr));
}

VarPtr concat_rows(const VarPtr& a, const VarPtr& b) {
  return make_node(
      composer::concat_rows(a->value, b->value), {a, b},
      [](Var& node) {
        const auto& a = node.parents[0];
        const auto& b = node.parents[1];
        const std::int64_t na = a->value.numel();
        if (a->requires_grad) {
          Tensor& g = a->ensure_grad();
          for (std::int64_t i = 0; i < na; ++i) g.data()[i] += node.grad.data()[i];
        }
        if (b->requires_grad) {
          Tensor& g = b->ensure_grad();
          for (std::int64_t i = 0; i < b->value.numel(); ++i) g.data()[i] += node.grad.data()[na + i];
        }
      },
      [](const std::vector<VarPtr>& parents) {
        const DVec& da = dval(parents[0]);
        const DVec& db = dval(parents[1]);
        auto out = std::make_shared<DVec>(da.size() + db.size());
        std::copy(da.begin(), da.end(), out->begin());
        std::copy(db.begin(), db.end(), out->begin() + static_cast<std::ptrdiff_t>(da.size()));
        return out;
      });
}

namespace {

std::vector<std::int64_t> s2d_perm(int c, int h, int w) {
  // out[(c*4 + dr*2+dc), r, col] = in[c, 2r+dr, 2col+dc]
  std::vector<std::int64_t> perm;
  perm.reserve(static_cast<size_t>(c) * h * w);
  const int oh = h / 2, ow = w / 2;
  for (int ch = 0; ch < c * 4; ++ch) {
    const int src_c = ch / 4;
    const int dr = (ch % 4) / 2, dc = ch % 2;
    for (int r = 0; r < oh; ++r)
      for (int col = 0; col < ow; ++col)
        perm.push_back((static_cast<std::int64_t>(src_c) * h + (r * 2 + dr)) * w + (col * 2 + dc));
  }
  return perm;
}

std::vector<std::int64_t> d2s_perm(int c4, int h, int w) {
  std::vector<std::int64_t> perm(static_cast<size_t>(c4) * h * w);
  const int c = c4 / 4;
  for (int ch = 0; ch < c; ++ch)
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col)
        for (int dr = 0; dr < 2; ++dr)
          for (int dc = 0; dc < 2; ++dc) {
            const std::int64_t dst =
                (static_cast<std::int64_t>(ch) * (h * 2) + (r * 2 + dr)) * (w * 2) + (col * 2 + dc);
            const std::int64_t src =
                (static_cast<std::int64_t>(ch * 4 + dr * 2 + dc) * h + r) * w + col;
            perm[static_cast<size_t>(dst)] = src;
          }
  return perm;
}

}  // namespace

VarPtr space_to_depth(const VarPtr& a) {
  const int c = a->value.dim(0), h = a->value.dim(1), w = a->value.dim(2);
  return make_node(
      composer::space_to_depth(a->value), {a},
      [](Var& node) {
        const auto& a = node.parents[0];
        if (!a->requires_grad) return;
        Tensor da = composer::depth_to_space(node.grad);
        Tensor& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g.data()[i] += da.data()[i];
      },
      g_dual ? permutation_dual(s2d_perm(c, h, w))
             : std::function<DPtr(const std::vector<VarPtr>&)>(nullptr));
}

VarPtr depth_to_space(const VarPtr& a) {
  const int c4 = a->value.dim(0), h = a->value.dim(1), w = a->value.dim(2);
  return make_node(
      composer::depth_to_space(a->value), {a},
      [](Var& node) {
        const auto& a = node.parents[0];
        if (!a->requires_grad) return;
        Tensor da = composer::space_to_depth(node.grad);
        Tensor& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g.data()[i] += da.data()[i];
      },
      g_dual ? permutation_dual(d2s_perm(c4, h, w))
             : std::function<DPtr(const std::vector<VarPtr>&)>(nullptr));
}

VarPtr add_row_broadcast(const VarPtr& x, const VarPtr& row) {
  const int n_rows = x->value.rows(), d = x->value.cols();
  if (row->value.numel() != d) {
    throw DimensionError("add_row_broadcast: row " + shape_str(row->value.shape()) + " vs x " +
                         shape_str(x->value.shape()));
  }
  Tensor out = x->value;
  for (int r = 0; r < n_rows; ++r)
    for (int c = 0; c < d; ++c) out(r, c) += row->value.data()[c];
  return make_node(
      std::move(out), {x, row},
      [n_rows, d](Var& node) {
        const auto& x = node.parents[0];
        const auto& row = node.parents[1];
        if (x->requires_grad) {
          Tensor& g = x->ensure_grad();
          for (std::int64_t i = 0; i < g.numel(); ++i) g.data()[i] += node.grad.data()[i];
        }
        if (row->requires_grad) {
          Tensor& g = row->ensure_grad();
          for (int r = 0; r < n_rows; ++r)
            for (int c = 0; c < d; ++c) g.data()[c] += node.grad(r, c);
        }
      },
      [n_rows, d](const std::vector<VarPtr>& parents) {
        const DVec& dx = dval(parents[0]);
        const DVec& drow = dval(parents[1]);
        auto out = std::make_shared<DVec>(dx.size());
        for (int r = 0; r < n_rows; ++r)
          for (int c = 0; c < d; ++c)
            (*out)[static_cast<size_t>(r) * d + c] = dx[static_cast<size_t>(r) * d + c] + drow[static_cast<size_t>(c)];
        return out;
      });
}

VarPtr mul_row_broadcast(const VarPtr& x, const VarPtr& row) {
  const int n_rows = x->value.rows(), d = x->value.cols();
  if (row->value.numel() != d) {
    throw DimensionError("mul_row_broadcast: row " + shape_str(row->value.shape()) + " vs x " +
                         shape_str(x->value.shape()));
  }
  Tensor out = x->value;
  for (int r = 0; r < n_rows; ++r)
    for (int c = 0; c < d; ++c) out(r, c) *= row->value.data()[c];
  return make_node(
      std::move(out), {x, row},
      [n_rows, d](Var& node) {
        const auto& x = node.parents[0];
        const auto& row = node.parents[1];
        if (x->requires_grad) {
          Tensor& g = x->ensure_grad();
          for (int r = 0; r < n_rows; ++r)
            for (int c = 0; c < d; ++c) g(r, c) += node.grad(r, c) * row->value.data()[c];
        }
        if (row->requires_grad) {
          Tensor& g = row->ensure_grad();
          for (int r = 0; r < n_rows; ++r)
            for (int c = 0; c < d; ++c) g.data()[c] += node.grad(r, c) * x->value(r, c);
        }
      },
      [n_rows, d](const std::vector<VarPtr>& parents) {
        const DVec& dx = dval(parents[0]);
        const DVec& drow = dval(parents[1]);
        auto out = std::make_shared<DVec>(dx.size());
        for (int r = 0; r < n_rows; ++r)
          for (int c = 0; c < d; ++c)
            (*out)[static_cast<size_t>(r) * d + c] =
                dx[static_cast<size_t>(r) * d + c] * drow[static_cast<size_t>(c)];
        return out;
      });
}

VarPtr scatter_add_rows(const VarPtr& base, const VarPtr& vec, std::vector<int> rows) {
  const int d = base->value.cols();
  if (vec->value.numel() != d) {
    throw DimensionError("scatter_add_rows: vec " + shape_str(vec->value.shape()) + " vs base " +
                         shape_str(base->value.shape()));
  }
  Tensor out = base->value;
  for (int r : rows)
    for (int c = 0; c < d; ++c) out(r, c) += vec->value.data()[c];
  auto rows_shared = std::make_shared<std::vector<int>>(std::move(rows));
  return make_node(
      std::move(out), {base, vec},
      [rows_shared, d](Var& node) {
        const auto& base = node.parents[0];
        const auto& vec = node.parents[1];
        if (base->requires_grad) {
          Tensor& g = base->ensure_grad();
          for (std::int64_t i = 0; i < g.numel(); ++i) g.data()[i] += node.grad.data()[i];
        }
        if (vec->requires_grad) {
          Tensor& g = vec->ensure_grad();
          for (int r : *rows_shared)
            for (int c = 0; c < d; ++c) g.data()[c] += node.grad(r, c);
        }
      },
      [rows_shared, d](const std::vector<VarPtr>& parents) {
        const DVec& dbase = dval(parents[0]);
        const DVec& dvec = dval(parents[1]);
        auto out = std::make_shared<DVec>(dbase);
        for (int r : *rows_shared)
          for (int c = 0; c < d; ++c) (*out)[static_cast<size_t>(r) * d + c] += dvec[static_cast<size_t>(c)];
        return out;
      });
}

VarPtr scaled_dot_attention(const VarPtr& q, const VarPtr& k, const VarPtr& v) {
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(q->value.cols()));
  VarPtr scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
  return matmul(softmax_rows(scores), v);
}

VarPtr mse(const VarPtr& pred, const Tensor& target) {
  if (!pred->value.same_shape(target)) {
    throw DimensionError("mse: pred " + shape_str(pred->value.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  const std::int64_t n = target.numel();
  float acc = 0.0f;
  for (std::int64_t i = 0; i < n; ++i) {
    const float d = pred->value.data()[i] - target.data()[i];
    acc += d * d;
  }
  Tensor out({1}, {acc / static_cast<float>(n)});
  return make_node(
      std::move(out), {pred},
      [target, n](Var& node) {
        const auto& pred = node.parents[0];
        if (!pred->requires_grad) return;
        const float up = node.grad.data()[0] * 2.0f / static_cast<float>(n);
        Tensor& g = pred->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) {
          g.data()[i] += up * (pred->value.data()[i] - target.data()[i]);
        }
      },
      [target, n](const std::vector<VarPtr>& parents) {
        const DVec& dp = dval(parents[0]);
        double acc = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
          const double d = dp[static_cast<size_t>(i)] - static_cast<double>(target.data()[i]);
          acc += d * d;
        }
        return std::make_shared<DVec>(DVec{acc / static_cast<double>(n)});
      });
}

void backward(const VarPtr& loss) {
  if (loss->value.numel() != 1) {
    throw DimensionError("backward: loss must be scalar, got " + shape_str(loss->value.shape()));
  }
  if (!loss->value.all_finite()) throw NumericError("backward: non-finite loss");

  // Collect the reachable subgraph, then replay in reverse creation order.
  std::vector<Var*> nodes;
  std::unordered_set<Var*> seen;
  std::vector<VarPtr> stack{loss};
  seen.insert(loss.get());
  while (!stack.empty()) {
    VarPtr cur = stack.back();
    stack.pop_back();
    nodes.push_back(cur.get());
    for (const auto& p : cur->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p);
    }
  }
  std::sort(nodes.begin(), nodes.end(), [](Var* a, Var* b) { return a->order > b->order; });

  loss->ensure_grad().data()[0] = 1.0f;
  for (Var* n : nodes) {
    if (n->backward_fn && n->requires_grad) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

}  // namespace composer::ad
