#pragma once

#include <cstdint>
#include <vector>

#include "composer/compose.hpp"
#include "composer/figure.hpp"
#include "composer/tensor.hpp"

namespace composer {

/// Key/value tokens of one self-attention site: both [(h'*w') x d].
struct KVPair {
  Tensor keys;
  Tensor values;
  int block_id = 0;
};

/// Mean-pooled text embedding of one asset's phrase span.
struct PhraseEmbedding {
  int asset_index = 0;
  Tensor pooled;  // [c]
};

/// Two-layer perceptron c -> d -> d with a GELU nonlinearity, one per
/// network block. The final layer is zero-initialized so a freshly created
/// MLP outputs exactly the zero vector and binding starts as a no-op.
struct BlockBindingMLP {
  int block_id = 0;
  Tensor w1;  // [c x d]
  Tensor b1;  // [d]
  Tensor w2;  // [d x d]
  Tensor b2;  // [d]

  static BlockBindingMLP zero_init(int block_id, int c, int d, std::uint64_t seed);

  /// [c] -> [d]
  Tensor apply(const Tensor& input) const;
};

/// Reference tokens concatenated after the denoiser's own tokens, then
/// scaled-dot attention: softmax(q [k_den,k_ref]^T / sqrt(d)) [v_den,v_ref].
Tensor feature_injection_attention(const Tensor& q_den, const KVPair& den, const KVPair& ref);

/// Adds mlp(phrase_i) to every selected key and value row of asset i.
/// Unselected rows are untouched; a selected asset without a phrase is a
/// BindingError. An MLP output that is exactly zero leaves rows bit-identical.
KVPair bind_tokens(const KVPair& kv, const TokenSelection& selection,
                   const std::vector<PhraseEmbedding>& phrases, const BlockBindingMLP& mlp);

/// Frames 2..N take frame 1's keys and values wholesale.
std::vector<KVPair> cross_frame_substitute(const std::vector<KVPair>& album);

/// Frames 2..N take frame 1's rows only where the quantized
/// (part, floor(u*quant), floor(v*quant)) triple matches a frame-1 token.
/// Collisions in frame 1 resolve first-wins in row-major scan order;
/// background (sentinel) tokens are never substituted.
std::vector<KVPair> correspondence_substitute(const std::vector<KVPair>& album,
                                              const std::vector<UVMap>& block_uv, int quant);

}  // namespace composer
