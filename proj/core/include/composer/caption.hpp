#pragma once

#include <array>
#include <string>
#include <vector>

#include "composer/asset.hpp"

namespace composer {

/// Closed 64-word vocabulary. The first 18 entries carry the caption
/// grammar; the rest are reserved filler so the id space stays fixed.
inline constexpr int kVocabSize = 64;
extern const std::array<const char*, kVocabSize> kVocabulary;

int word_id(const std::string& word);  // throws ParameterError on OOV

/// Token range [start, end) describing one asset.
struct PhraseSpan {
  int asset_index = 0;
  int start = 0;
  int end = 0;
};

struct TextPrompt {
  std::vector<int> tokens;
  std::vector<PhraseSpan> spans;

  std::string text() const;
};

/// Grayscale bucket adjective for a base value: 8 buckets over [0, 1].
int value_word_id(float base);

/// Fixed grammar "a <pattern> <value> <category>", assets comma-separated,
/// one span per asset covering its four words. Duplicate categories are an
/// error (one garment per slot).
TextPrompt caption_sample(const std::vector<AssetImage>& assets);

}  // namespace composer
