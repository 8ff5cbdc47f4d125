#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "composer/attention.hpp"
#include "composer/autodiff.hpp"
#include "composer/errors.hpp"
#include "composer/gradcheck.hpp"
#include "composer/rng.hpp"
#include "doctest.h"

using namespace composer;

namespace {

KVPair random_kv(Rng& rng, int p, int d, int block_id) {
  return {rng.normal_tensor({p, d}), rng.normal_tensor({p, d}), block_id};
}

UVMap grid_uv(int h, int w, const std::vector<std::tuple<int, float, float>>& cells) {
  UVMap uv;
  uv.height = h;
  uv.width = w;
  uv.u.assign(static_cast<size_t>(h) * w, -1.0f);
  uv.v.assign(static_cast<size_t>(h) * w, -1.0f);
  uv.part.assign(static_cast<size_t>(h) * w, 0);
  for (size_t i = 0; i < cells.size() && i < uv.part.size(); ++i) {
    const auto& [part, u, v] = cells[i];
    uv.part[i] = part;
    uv.u[i] = u;
    uv.v[i] = v;
  }
  return uv;
}

// Brute-force matcher: for each frame-2 foreground token, scan frame 1 in
// row-major order for the first token with the same quantized triple.
std::vector<int> match_oracle(const UVMap& uv0, const UVMap& uv1, int quant) {
  const int n = uv1.height * uv1.width;
  std::vector<int> match(static_cast<size_t>(n), -1);
  for (int t = 0; t < n; ++t) {
    if (uv1.part[static_cast<size_t>(t)] == 0) continue;
    for (int s = 0; s < uv0.height * uv0.width; ++s) {
      if (uv0.part[static_cast<size_t>(s)] != uv1.part[static_cast<size_t>(t)]) continue;
      if (static_cast<int>(std::floor(uv0.u[static_cast<size_t>(s)] * quant)) ==
              static_cast<int>(std::floor(uv1.u[static_cast<size_t>(t)] * quant)) &&
          static_cast<int>(std::floor(uv0.v[static_cast<size_t>(s)] * quant)) ==
              static_cast<int>(std::floor(uv1.v[static_cast<size_t>(t)] * quant))) {
        match[static_cast<size_t>(t)] = s;
        break;
      }
    }
  }
  return match;
}

}  // namespace

TEST_CASE("duplicated reference equals plain self-attention") {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = 1 + static_cast<int>(rng.next_u64() % 16);
    const int p = 1 + static_cast<int>(rng.next_u64() % 16);
    const int d = 1 + static_cast<int>(rng.next_u64() % 32);
    const Tensor q = rng.normal_tensor({m, d});
    const KVPair den = random_kv(rng, p, d, 1);
    const Tensor plain = scaled_dot_attention(q, den.keys, den.values);
    const Tensor injected = feature_injection_attention(q, den, den);
    CHECK(max_abs_diff(plain, injected) <= 1e-6f);
  }
}

TEST_CASE("never-attended reference keys leave the output unchanged") {
  Rng rng(2);
  const int m = 3, p = 4, d = 8;
  const Tensor q = rng.uniform_tensor({m, d}, 0.1f, 1.0f);  // positive rows
  const KVPair den = random_kv(rng, p, d, 2);
  KVPair ref;
  ref.block_id = 2;
  ref.keys = Tensor::full({p, d}, -1e6f);
  ref.values = Tensor({p, d});
  const Tensor out = feature_injection_attention(q, den, ref);
  const Tensor plain = scaled_dot_attention(q, den.keys, den.values);
  CHECK(max_abs_diff(out, plain) <= 1e-6f);
}

TEST_CASE("injection equals concat-then-attention exactly") {
  Rng rng(3);
  const Tensor q = rng.normal_tensor({2, 4});
  const KVPair den = random_kv(rng, 2, 4, 1);
  const KVPair ref = random_kv(rng, 2, 4, 1);
  const Tensor expected =
      scaled_dot_attention(q, concat_rows(den.keys, ref.keys), concat_rows(den.values, ref.values));
  CHECK(bit_equal(feature_injection_attention(q, den, ref), expected));
}

TEST_CASE("injection rejects block and dim mismatches") {
  Rng rng(4);
  const Tensor q = rng.normal_tensor({2, 4});
  const KVPair den = random_kv(rng, 2, 4, 1);
  KVPair wrong_block = random_kv(rng, 2, 4, 2);
  CHECK_THROWS_AS(feature_injection_attention(q, den, wrong_block), DimensionError);
  KVPair wrong_dim = random_kv(rng, 2, 6, 1);
  CHECK_THROWS_AS(feature_injection_attention(q, den, wrong_dim), DimensionError);
}

namespace {

TokenSelection selection_for(int block_id, int h, int w,
                             std::vector<std::vector<int>> asset_tokens) {
  TokenSelection sel;
  sel.block_id = block_id;
  sel.height = h;
  sel.width = w;
  sel.asset_tokens = std::move(asset_tokens);
  return sel;
}

}  // namespace

TEST_CASE("zero-initialized binding is bit-identical") {
  Rng rng(5);
  const KVPair kv = random_kv(rng, 6, 4, 1);
  const BlockBindingMLP mlp = BlockBindingMLP::zero_init(1, 3, 4, 9);
  const TokenSelection sel = selection_for(1, 2, 3, {{0, 2, 4}});
  const std::vector<PhraseEmbedding> phrases = {{0, rng.normal_tensor({3})}};
  const KVPair out = bind_tokens(kv, sel, phrases, mlp);
  CHECK(bit_equal(out.keys, kv.keys));
  CHECK(bit_equal(out.values, kv.values));
}

TEST_CASE("empty selection is bit-identical and needs no phrase") {
  Rng rng(6);
  const KVPair kv = random_kv(rng, 6, 4, 1);
  BlockBindingMLP mlp = BlockBindingMLP::zero_init(1, 3, 4, 9);
  mlp.w2 = rng.normal_tensor({4, 4});
  const TokenSelection sel = selection_for(1, 2, 3, {{}});
  const KVPair out = bind_tokens(kv, sel, {}, mlp);
  CHECK(bit_equal(out.keys, kv.keys));
  CHECK(bit_equal(out.values, kv.values));
}

TEST_CASE("binding adds the mlp vector to exactly the selected rows") {
  Rng rng(7);
  const KVPair kv = random_kv(rng, 3, 4, 2);
  BlockBindingMLP mlp = BlockBindingMLP::zero_init(2, 3, 4, 9);
  mlp.w2 = rng.normal_tensor({4, 4});
  mlp.b2 = rng.normal_tensor({4});
  const PhraseEmbedding phrase{0, rng.normal_tensor({3})};
  const Tensor g = mlp.apply(phrase.pooled);
  const TokenSelection sel = selection_for(2, 1, 3, {{0, 2}});
  const KVPair out = bind_tokens(kv, sel, {phrase}, mlp);
  for (int j = 0; j < 4; ++j) {
    CHECK(out.keys(0, j) == kv.keys(0, j) + g.data()[j]);
    CHECK(out.keys(1, j) == kv.keys(1, j));
    CHECK(out.keys(2, j) == kv.keys(2, j) + g.data()[j]);
    CHECK(out.values(0, j) == kv.values(0, j) + g.data()[j]);
    CHECK(out.values(1, j) == kv.values(1, j));
  }
}

TEST_CASE("missing phrase for a selected asset fails loud") {
  Rng rng(8);
  const KVPair kv = random_kv(rng, 3, 4, 1);
  BlockBindingMLP mlp = BlockBindingMLP::zero_init(1, 3, 4, 9);
  const TokenSelection sel = selection_for(1, 1, 3, {{0}});
  CHECK_THROWS_AS(bind_tokens(kv, sel, {}, mlp), BindingError);
}

TEST_CASE("binding composes additively") {
  // Integer-valued vectors keep the sums exact in f32.
  Rng rng(9);
  KVPair kv;
  kv.block_id = 1;
  kv.keys = Tensor({4, 3});
  kv.values = Tensor({4, 3});
  for (std::int64_t i = 0; i < kv.keys.numel(); ++i) {
    kv.keys.data()[i] = static_cast<float>(static_cast<int>(rng.next_u64() % 64));
    kv.values.data()[i] = static_cast<float>(static_cast<int>(rng.next_u64() % 64));
  }
  auto integer_mlp = [&](float a, float b, float c) {
    BlockBindingMLP mlp = BlockBindingMLP::zero_init(1, 2, 3, 1);
    mlp.b2 = Tensor({3}, {a, b, c});  // w2 stays zero: output == b2 exactly
    return mlp;
  };
  const BlockBindingMLP g = integer_mlp(3, -2, 5);
  const BlockBindingMLP h = integer_mlp(1, 7, -4);
  const BlockBindingMLP gh = integer_mlp(4, 5, 1);
  const TokenSelection sel = selection_for(1, 2, 2, {{1, 3}});
  const std::vector<PhraseEmbedding> phrases = {{0, Tensor({2})}};
  const KVPair twice = bind_tokens(bind_tokens(kv, sel, phrases, g), sel, phrases, h);
  const KVPair once = bind_tokens(kv, sel, phrases, gh);
  CHECK(bit_equal(twice.keys, once.keys));
  CHECK(bit_equal(twice.values, once.values));
}

TEST_CASE("cross frame substitution") {
  Rng rng(10);
  const KVPair f1 = random_kv(rng, 4, 4, 1);
  SUBCASE("single frame is identity") {
    const auto out = cross_frame_substitute({f1});
    CHECK(bit_equal(out[0].keys, f1.keys));
  }
  SUBCASE("later frames take frame 1's tokens") {
    const KVPair f2 = random_kv(rng, 4, 4, 1);
    const KVPair f3 = random_kv(rng, 4, 4, 1);
    const auto out = cross_frame_substitute({f1, f2, f3});
    CHECK(bit_equal(out[0].keys, f1.keys));
    CHECK(bit_equal(out[1].keys, f1.keys));
    CHECK(bit_equal(out[2].values, f1.values));
    // Identical q over substituted K/V gives identical attention outputs.
    const Tensor q = rng.normal_tensor({3, 4});
    const Tensor a1 = scaled_dot_attention(q, out[0].keys, out[0].values);
    const Tensor a2 = scaled_dot_attention(q, out[1].keys, out[1].values);
    CHECK(bit_equal(a1, a2));
  }
}

TEST_CASE("correspondence substitution with identical uv grids") {
  Rng rng(11);
  const int h = 2, w = 3;
  const UVMap uv = grid_uv(h, w, {{1, 0.1f, 0.1f}, {1, 0.4f, 0.1f}, {0, -1, -1},
                                  {2, 0.2f, 0.6f}, {0, -1, -1}, {1, 0.8f, 0.9f}});
  const KVPair f1 = random_kv(rng, h * w, 4, 1);
  const KVPair f2 = random_kv(rng, h * w, 4, 1);
  const auto out = correspondence_substitute({f1, f2}, {uv, uv}, 16);
  const auto match = match_oracle(uv, uv, 16);
  for (int t = 0; t < h * w; ++t) {
    for (int j = 0; j < 4; ++j) {
      if (match[static_cast<size_t>(t)] >= 0) {
        CHECK(out[1].keys(t, j) == f1.keys(match[static_cast<size_t>(t)], j));
      } else {
        CHECK(out[1].keys(t, j) == f2.keys(t, j));  // background untouched
      }
    }
  }
  // Every foreground token matched itself, so this equals cross-frame
  // substitution restricted to the foreground.
  const auto cross = cross_frame_substitute({f1, f2});
  for (int t = 0; t < h * w; ++t) {
    const bool fg = uv.part[static_cast<size_t>(t)] != 0;
    for (int j = 0; j < 4; ++j) {
      CHECK(out[1].keys(t, j) == (fg ? cross[1].keys(t, j) : f2.keys(t, j)));
    }
  }
}

TEST_CASE("disjoint part sets leave the album bit-identical") {
  Rng rng(12);
  const UVMap uv0 = grid_uv(1, 3, {{1, 0.1f, 0.1f}, {1, 0.5f, 0.5f}, {0, -1, -1}});
  const UVMap uv1 = grid_uv(1, 3, {{2, 0.1f, 0.1f}, {2, 0.5f, 0.5f}, {0, -1, -1}});
  const KVPair f1 = random_kv(rng, 3, 4, 1);
  const KVPair f2 = random_kv(rng, 3, 4, 1);
  const auto out = correspondence_substitute({f1, f2}, {uv0, uv1}, 16);
  CHECK(bit_equal(out[1].keys, f2.keys));
  CHECK(bit_equal(out[1].values, f2.values));
}

TEST_CASE("exactly one shared quantized triple substitutes exactly one row") {
  Rng rng(13);
  const UVMap uv0 = grid_uv(2, 2, {{1, 0.1f, 0.1f}, {1, 0.6f, 0.6f}, {0, -1, -1}, {0, -1, -1}});
  const UVMap uv1 = grid_uv(2, 2, {{1, 0.9f, 0.9f}, {0, -1, -1}, {1, 0.62f, 0.61f}, {0, -1, -1}});
  // Token 2 of frame 2 quantizes to the same cell as token 1 of frame 1;
  // token 0 of frame 2 has no counterpart.
  const KVPair f1 = random_kv(rng, 4, 4, 1);
  const KVPair f2 = random_kv(rng, 4, 4, 1);
  const auto out = correspondence_substitute({f1, f2}, {uv0, uv1}, 16);
  int replaced = 0;
  for (int t = 0; t < 4; ++t) {
    bool row_equal = true;
    for (int j = 0; j < 4; ++j) row_equal = row_equal && out[1].keys(t, j) == f2.keys(t, j);
    if (!row_equal) {
      ++replaced;
      for (int j = 0; j < 4; ++j) CHECK(out[1].keys(t, j) == f1.keys(1, j));
    }
  }
  CHECK(replaced == 1);
}

TEST_CASE("correspondence never touches frame 1 or sentinel tokens") {
  Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 2 + static_cast<int>(rng.next_u64() % 3);
    const int w = 2 + static_cast<int>(rng.next_u64() % 3);
    auto random_uv = [&]() {
      std::vector<std::tuple<int, float, float>> cells;
      for (int i = 0; i < h * w; ++i) {
        if (rng.uniform() < 0.4f) {
          cells.push_back({0, -1.0f, -1.0f});
        } else {
          cells.push_back({1 + static_cast<int>(rng.next_u64() % 3), rng.uniform(), rng.uniform()});
        }
      }
      return grid_uv(h, w, cells);
    };
    const UVMap uv0 = random_uv(), uv1 = random_uv();
    const KVPair f1 = random_kv(rng, h * w, 3, 1);
    const KVPair f2 = random_kv(rng, h * w, 3, 1);
    const auto out = correspondence_substitute({f1, f2}, {uv0, uv1}, 16);
    CHECK(bit_equal(out[0].keys, f1.keys));
    CHECK(bit_equal(out[0].values, f1.values));
    for (int t = 0; t < h * w; ++t) {
      if (uv1.part[static_cast<size_t>(t)] == 0) {
        for (int j = 0; j < 3; ++j) CHECK(out[1].keys(t, j) == f2.keys(t, j));
      }
    }
  }
}

TEST_CASE("gradients flow through injection and binding") {
  // Loss: mse(softmax(q [k;k_ref']^T/sqrt(d)) [v;v_ref'], target) where the
  // reference tokens are bound with the MLP output; checked against central
  // differences at m=p=d=c=4.
  Rng rng(15);
  const int m = 4, p = 4, d = 4, c = 4;
  const Tensor q_in = rng.normal_tensor({m, d});
  const Tensor den_k = rng.normal_tensor({p, d});
  const Tensor den_v = rng.normal_tensor({p, d});
  const Tensor ref_tokens = rng.normal_tensor({p, d});
  const Tensor pooled = rng.normal_tensor({1, c});
  const Tensor target = rng.normal_tensor({m, d});
  const std::vector<int> bound_rows = {0, 2};

  const std::vector<std::string> names = {"wk_ref", "wv_ref", "w1", "b1", "w2", "b2"};
  auto build = [&](const std::vector<Tensor>& params, bool grad) {
    std::vector<ad::VarPtr> vars;
    for (const auto& t : params) vars.push_back(ad::leaf(t, grad));
    ad::VarPtr k_ref = ad::matmul(ad::constant(ref_tokens), vars[0]);
    ad::VarPtr v_ref = ad::matmul(ad::constant(ref_tokens), vars[1]);
    ad::VarPtr hidden = ad::gelu(
        ad::add_row_broadcast(ad::matmul(ad::constant(pooled), vars[2]), vars[3]));
    ad::VarPtr g = ad::add_row_broadcast(ad::matmul(hidden, vars[4]), vars[5]);
    k_ref = ad::scatter_add_rows(k_ref, g, bound_rows);
    v_ref = ad::scatter_add_rows(v_ref, g, bound_rows);
    ad::VarPtr k = ad::concat_rows(ad::constant(den_k), k_ref);
    ad::VarPtr v = ad::concat_rows(ad::constant(den_v), v_ref);
    ad::VarPtr out = ad::scaled_dot_attention(ad::constant(q_in), k, v);
    return ad::mse(out, target);
  };

  GradCheckTarget check;
  check.value = [&](const std::vector<Tensor>& params) {
    ad::set_dual_precision(true);
    ad::VarPtr loss = build(params, false);
    ad::set_dual_precision(false);
    return ad::scalar_value(loss);
  };
  check.gradient = [&](const std::vector<Tensor>& params) {
    std::vector<ad::VarPtr> vars;
    for (const auto& t : params) vars.push_back(ad::leaf(t, true));
    ad::VarPtr k_ref = ad::matmul(ad::constant(ref_tokens), vars[0]);
    ad::VarPtr v_ref = ad::matmul(ad::constant(ref_tokens), vars[1]);
    ad::VarPtr hidden = ad::gelu(
        ad::add_row_broadcast(ad::matmul(ad::constant(pooled), vars[2]), vars[3]));
    ad::VarPtr g = ad::add_row_broadcast(ad::matmul(hidden, vars[4]), vars[5]);
    k_ref = ad::scatter_add_rows(k_ref, g, bound_rows);
    v_ref = ad::scatter_add_rows(v_ref, g, bound_rows);
    ad::VarPtr k = ad::concat_rows(ad::constant(den_k), k_ref);
    ad::VarPtr v = ad::concat_rows(ad::constant(den_v), v_ref);
    ad::VarPtr out = ad::scaled_dot_attention(ad::constant(q_in), k, v);
    ad::VarPtr loss = ad::mse(out, target);
    ad::backward(loss);
    std::vector<Tensor> grads;
    for (const auto& var : vars) {
      grads.push_back(var->grad.empty() ? Tensor(var->value.shape()) : var->grad);
    }
    return grads;
  };

  std::vector<Tensor> params = {rng.normal_tensor({d, d}), rng.normal_tensor({d, d}),
                                rng.normal_tensor({c, d}), rng.normal_tensor({1, d}),
                                rng.normal_tensor({d, d}), rng.normal_tensor({1, d})};
  const GradReport report = finite_diff_gradcheck(check, params, 1e-3f, 1e-4f, names);
  CHECK(report.pass);
}
