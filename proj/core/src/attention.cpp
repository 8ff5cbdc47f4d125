#include "composer/attention.hpp"

#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "composer/errors.hpp"
#include "composer/rng.hpp"

namespace composer {

BlockBindingMLP BlockBindingMLP::zero_init(int block_id, int c, int d, std::uint64_t seed) {
  BlockBindingMLP mlp;
  mlp.block_id = block_id;
  Rng rng = Rng(seed).derive("bind_mlp_" + std::to_string(block_id));
  mlp.w1 = rng.normal_tensor({c, d});
  const float s = 1.0f / std::sqrt(static_cast<float>(c));
  for (auto& v : mlp.w1.raw()) v *= s;
  mlp.b1 = Tensor({d});
  mlp.w2 = Tensor({d, d});
  mlp.b2 = Tensor({d});
  return mlp;
}

Tensor BlockBindingMLP::apply(const Tensor& input) const {
  if (input.numel() != w1.rows()) {
    throw DimensionError("binding mlp: input " + shape_str(input.shape()) + " vs w1 " +
                         shape_str(w1.shape()));
  }
  Tensor hidden = matmul(Tensor({1, w1.rows()}, input.raw()), w1);
  for (int j = 0; j < hidden.cols(); ++j) {
    hidden(0, j) = gelu_scalar(hidden(0, j) + b1.data()[j]);
  }
  Tensor out = matmul(hidden, w2);
  for (int j = 0; j < out.cols(); ++j) out(0, j) += b2.data()[j];
  return Tensor({out.cols()}, out.raw());
}

Tensor feature_injection_attention(const Tensor& q_den, const KVPair& den, const KVPair& ref) {
  if (den.block_id != ref.block_id) {
    throw DimensionError("feature_injection_attention: block mismatch " +
                         std::to_string(den.block_id) + " vs " + std::to_string(ref.block_id));
  }
  if (q_den.cols() != den.keys.cols() || den.keys.cols() != ref.keys.cols()) {
    throw DimensionError("feature_injection_attention: token dim mismatch q " +
                         shape_str(q_den.shape()) + ", den " + shape_str(den.keys.shape()) +
                         ", ref " + shape_str(ref.keys.shape()));
  }
  // Denoising tokens first, reference tokens second.
  Tensor k = concat_rows(den.keys, ref.keys);
  Tensor v = concat_rows(den.values, ref.values);
  return scaled_dot_attention(q_den, k, v);
}

KVPair bind_tokens(const KVPair& kv, const TokenSelection& selection,
                   const std::vector<PhraseEmbedding>& phrases, const BlockBindingMLP& mlp) {
  if (selection.block_id != kv.block_id || mlp.block_id != kv.block_id) {
    throw DimensionError("bind_tokens: block ids differ (kv " + std::to_string(kv.block_id) +
                         ", selection " + std::to_string(selection.block_id) + ", mlp " +
                         std::to_string(mlp.block_id) + ")");
  }
  const int token_count = selection.height * selection.width;
  if (kv.keys.rows() != token_count) {
    throw DimensionError("bind_tokens: kv rows " + shape_str(kv.keys.shape()) +
                         " vs block grid " + std::to_string(selection.height) + "x" +
                         std::to_string(selection.width));
  }

  KVPair out = kv;
  const int d = kv.keys.cols();
  for (size_t asset = 0; asset < selection.asset_tokens.size(); ++asset) {
    const auto& tokens = selection.asset_tokens[asset];
    if (tokens.empty()) continue;

    const PhraseEmbedding* phrase = nullptr;
    for (const auto& p : phrases) {
      if (p.asset_index == static_cast<int>(asset)) {
        phrase = &p;
        break;
      }
    }
    if (phrase == nullptr) {
      throw BindingError("bind_tokens: asset " + std::to_string(asset) +
                         " has selected tokens but no phrase embedding");
    }

    const Tensor g = mlp.apply(phrase->pooled);
    bool all_zero = true;
    for (float x : g.raw()) {
      if (x != 0.0f) {
        all_zero = false;
        break;
      }
    }
    if (all_zero) continue;  // keeps zero-init binding bit-identical

    for (int row : tokens) {
      if (row < 0 || row >= token_count) {
        throw DimensionError("bind_tokens: token index " + std::to_string(row) + " out of range");
      }
      for (int j = 0; j < d; ++j) {
        out.keys(row, j) += g.data()[j];
        out.values(row, j) += g.data()[j];
      }
    }
  }
  return out;
}

std::vector<KVPair> cross_frame_substitute(const std::vector<KVPair>& album) {
  if (album.empty()) throw ParameterError("cross_frame_substitute: empty album");
  std::vector<KVPair> out = album;
  for (size_t i = 1; i < out.size(); ++i) {
    if (out[i].block_id != album[0].block_id || !out[i].keys.same_shape(album[0].keys)) {
      throw DimensionError("cross_frame_substitute: frame " + std::to_string(i) +
                           " does not match frame 1");
    }
    out[i].keys = album[0].keys;
    out[i].values = album[0].values;
  }
  return out;
}

namespace {

std::uint64_t uv_key(int part, int qu, int qv) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(part)) << 40) ^
         (static_cast<std::uint64_t>(static_cast<std::uint32_t>(qu)) << 20) ^
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(qv));
}

}  // namespace

std::vector<KVPair> correspondence_substitute(const std::vector<KVPair>& album,
                                              const std::vector<UVMap>& block_uv, int quant) {
  if (album.empty()) throw ParameterError("correspondence_substitute: empty album");
  if (album.size() != block_uv.size()) {
    throw DimensionError("correspondence_substitute: " + std::to_string(album.size()) +
                         " frames vs " + std::to_string(block_uv.size()) + " uv grids");
  }
  if (quant < 1) throw ParameterError("correspondence_substitute: quant must be >= 1");

  const int tokens = album[0].keys.rows();
  for (size_t i = 0; i < album.size(); ++i) {
    if (!album[i].keys.same_shape(album[0].keys) || album[i].block_id != album[0].block_id) {
      throw DimensionError("correspondence_substitute: frame " + std::to_string(i) +
                           " kv mismatch");
    }
    if (block_uv[i].height * block_uv[i].width != tokens) {
      throw DimensionError("correspondence_substitute: uv grid " +
                           std::to_string(block_uv[i].height) + "x" +
                           std::to_string(block_uv[i].width) + " vs " + std::to_string(tokens) +
                           " tokens");
    }
  }

  // Frame-1 lookup: quantized triple -> token index, first-wins row-major.
  std::unordered_map<std::uint64_t, int> frame1;
  const UVMap& uv0 = block_uv[0];
  for (int t = 0; t < tokens; ++t) {
    if (uv0.part[static_cast<size_t>(t)] == 0) continue;
    const int qu = static_cast<int>(std::floor(uv0.u[static_cast<size_t>(t)] * quant));
    const int qv = static_cast<int>(std::floor(uv0.v[static_cast<size_t>(t)] * quant));
    frame1.emplace(uv_key(uv0.part[static_cast<size_t>(t)], qu, qv), t);
  }

  std::vector<KVPair> out = album;
  const int d = album[0].keys.cols();
  for (size_t f = 1; f < out.size(); ++f) {
    const UVMap& uv = block_uv[f];
    for (int t = 0; t < tokens; ++t) {
      if (uv.part[static_cast<size_t>(t)] == 0) continue;  // sentinel tokens stay
      const int qu = static_cast<int>(std::floor(uv.u[static_cast<size_t>(t)] * quant));
      const int qv = static_cast<int>(std::floor(uv.v[static_cast<size_t>(t)] * quant));
      auto hit = frame1.find(uv_key(uv.part[static_cast<size_t>(t)], qu, qv));
      if (hit == frame1.end()) continue;
      for (int j = 0; j < d; ++j) {
        out[f].keys(t, j) = album[0].keys(hit->second, j);
        out[f].values(t, j) = album[0].values(hit->second, j);
      }
    }
  }
  return out;
}

}  // namespace composer
