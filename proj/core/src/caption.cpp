#include "composer/caption.hpp"

#include <algorithm>

#include "composer/errors.hpp"

namespace composer {

const std::array<const char*, kVocabSize> kVocabulary = {
    "a",      ",",       "solid",   "striped", "checkered", "dotted",  "black",  "dark",
    "dusky",  "gray",    "silver",  "pale",    "light",     "bright",  "upper",  "lower",
    "shoes",  "face",    "person",  "figure",  "model",     "wearing", "with",   "and",
    "the",    "an",      "in",      "on",      "of",        "style",   "tone",   "pattern",
    "outfit", "look",    "photo",   "image",   "left",      "right",   "front",  "back",
    "tall",   "short",   "wide",    "narrow",  "plain",     "fancy",   "soft",   "bold",
    "calm",   "cool",    "warm",    "crisp",   "faded",     "fresh",   "matte",  "glossy",
    "retro",  "modern",  "classic", "casual",  "formal",    "sporty",  "urban",  "simple"};

int word_id(const std::string& word) {
  for (int i = 0; i < kVocabSize; ++i) {
    if (word == kVocabulary[static_cast<size_t>(i)]) return i;
  }
  throw ParameterError("word '" + word + "' is not in the vocabulary");
}

std::string TextPrompt::text() const {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += " ";
    out += kVocabulary[static_cast<size_t>(tokens[i])];
  }
  return out;
}

int value_word_id(float base) {
  int bucket = static_cast<int>(base * 8.0f);
  bucket = std::clamp(bucket, 0, 7);
  return word_id("black") + bucket;
}

namespace {

int pattern_word_id(PatternKind p) {
  switch (p) {
    case PatternKind::kSolid:
      return word_id("solid");
    case PatternKind::kStripes:
      return word_id("striped");
    case PatternKind::kChecker:
      return word_id("checkered");
    case PatternKind::kDots:
      return word_id("dotted");
  }
  throw ParameterError("unknown pattern id");
}

int category_word_id(Category c) { return word_id(category_name(c)); }

}  // namespace

TextPrompt caption_sample(const std::vector<AssetImage>& assets) {
  if (assets.size() > 4) {
    throw ParameterError("caption_sample: at most 4 assets supported");
  }
  bool seen[kCategoryCount] = {false, false, false, false};
  for (const auto& a : assets) {
    bool& slot = seen[static_cast<int>(a.category)];
    if (slot) {
      throw ParameterError(std::string("caption_sample: duplicate category '") +
                           category_name(a.category) + "'");
    }
    slot = true;
  }

  TextPrompt prompt;
  const int comma = word_id(",");
  for (size_t i = 0; i < assets.size(); ++i) {
    if (i) prompt.tokens.push_back(comma);
    PhraseSpan span;
    span.asset_index = static_cast<int>(i);
    span.start = static_cast<int>(prompt.tokens.size());
    prompt.tokens.push_back(word_id("a"));
    prompt.tokens.push_back(pattern_word_id(assets[i].pattern));
    prompt.tokens.push_back(value_word_id(assets[i].base));
    prompt.tokens.push_back(category_word_id(assets[i].category));
    span.end = static_cast<int>(prompt.tokens.size());
    prompt.spans.push_back(span);
  }
  return prompt;
}

}  // namespace composer
