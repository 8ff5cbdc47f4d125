#include "composer/embedder.hpp"

#include <cmath>

#include "composer/errors.hpp"
#include "composer/rng.hpp"

namespace composer {

TextEmbedder::TextEmbedder(int dim, std::uint64_t seed) : dim_(dim) {
  if (dim < 1) throw ParameterError("TextEmbedder: dim must be >= 1");
  Rng rng = Rng(seed).derive("text_embedder");
  table_ = rng.normal_tensor({kVocabSize, dim});
  // Unit-norm rows: near-orthogonal in expectation, scale-stable.
  for (int r = 0; r < kVocabSize; ++r) {
    float norm2 = 0.0f;
    for (int c = 0; c < dim; ++c) norm2 += table_(r, c) * table_(r, c);
    const float inv = 1.0f / std::sqrt(std::max(norm2, 1e-12f));
    for (int c = 0; c < dim; ++c) table_(r, c) *= inv;
  }
}

Tensor TextEmbedder::embed(const TextPrompt& prompt) const {
  if (prompt.tokens.empty()) return Tensor({1, dim_});  // single zero row for empty prompts
  Tensor out({static_cast<int>(prompt.tokens.size()), dim_});
  for (size_t i = 0; i < prompt.tokens.size(); ++i) {
    const int id = prompt.tokens[i];
    if (id < 0 || id >= kVocabSize) {
      throw ParameterError("embed: token id " + std::to_string(id) + " out of vocabulary");
    }
    for (int c = 0; c < dim_; ++c) out(static_cast<int>(i), c) = table_(id, c);
  }
  return out;
}

PhraseEmbedding TextEmbedder::phrase_embedding(const TextPrompt& prompt,
                                               const PhraseSpan& span) const {
  if (span.start < 0 || span.end > static_cast<int>(prompt.tokens.size()) ||
      span.start >= span.end) {
    throw ParameterError("phrase_embedding: span [" + std::to_string(span.start) + ", " +
                         std::to_string(span.end) + ") out of range");
  }
  PhraseEmbedding pe;
  pe.asset_index = span.asset_index;
  pe.pooled = Tensor({dim_});
  for (int i = span.start; i < span.end; ++i) {
    const int id = prompt.tokens[static_cast<size_t>(i)];
    if (id < 0 || id >= kVocabSize) {
      throw ParameterError("phrase_embedding: token id " + std::to_string(id) +
                           " out of vocabulary");
    }
    for (int c = 0; c < dim_; ++c) pe.pooled.data()[c] += table_(id, c);
  }
  const float inv = 1.0f / static_cast<float>(span.end - span.start);
  for (auto& v : pe.pooled.raw()) v *= inv;
  return pe;
}

std::vector<PhraseEmbedding> TextEmbedder::phrase_embeddings(const TextPrompt& prompt) const {
  std::vector<PhraseEmbedding> out;
  out.reserve(prompt.spans.size());
  for (const auto& span : prompt.spans) out.push_back(phrase_embedding(prompt, span));
  return out;
}

}  // namespace composer
