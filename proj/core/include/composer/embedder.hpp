#pragma once

#include <cstdint>

#include "composer/attention.hpp"
#include "composer/caption.hpp"
#include "composer/tensor.hpp"

namespace composer {

/// Frozen deterministic text encoder: a seeded lookup table with unit-norm
/// rows. The same token id maps to the same vector in every run with the
/// same seed.
class TextEmbedder {
 public:
  TextEmbedder(int dim, std::uint64_t seed);

  int dim() const { return dim_; }
  const Tensor& table() const { return table_; }

  /// [s x c] row per token.
  Tensor embed(const TextPrompt& prompt) const;

  /// Mean over the span's token rows.
  PhraseEmbedding phrase_embedding(const TextPrompt& prompt, const PhraseSpan& span) const;

  std::vector<PhraseEmbedding> phrase_embeddings(const TextPrompt& prompt) const;

 private:
  int dim_;
  Tensor table_;  // [64 x c]
};

}  // namespace composer
