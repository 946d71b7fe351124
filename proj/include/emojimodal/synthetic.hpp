#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "emojimodal/corpus.hpp"

namespace emojimodal {

struct ClassRange {
  std::size_t begin = 0;
  std::size_t end = static_cast<std::size_t>(-1);  // clamped to the class count

  bool contains(std::size_t c) const { return c >= begin && c < end; }
};

struct SynthConfig {
  std::size_t classes = 30;
  std::size_t docs = 3000;
  // Probability that a text-explained document carries its own class
  // signature; otherwise it carries the signature of a uniformly random class.
  double strength = 1.0;
  std::size_t filler_vocab = 200;
  std::size_t min_filler_tokens = 4;
  std::size_t max_filler_tokens = 10;
  // Classes whose text carries a signature token. Other documents get filler only.
  ClassRange text_classes;
  // 0 disables image features. Image-explained classes get a class-aligned
  // direction plus N(0, image_noise^2); others get noise only.
  std::size_t image_dim = 0;
  double image_noise = 0.1;
  ClassRange image_classes;
  // Probability of a second, distinct emoji annotation on a document.
  double multi_label_rate = 0.0;
  // Random word vectors for every token (0 disables).
  std::size_t embedding_dim = 0;
  // Visual concept names per document (0 disables); the first names the
  // signature of the document's class when image-explained.
  std::size_t concepts_per_doc = 0;
};

struct GroundTruth {
  std::vector<std::string> signature_tokens;     // per class
  std::vector<ClassIndex> primary_class;         // per record
  std::vector<std::vector<ClassIndex>> planted;  // per record: emoji classes placed, in text order
  std::vector<long> planted_signature;           // per record: signature class in text, -1 if none
  std::vector<std::size_t> class_counts;         // documents carrying each class
};

struct SyntheticData {
  std::shared_ptr<const EmojiCatalog> catalog;
  std::vector<RawRecord> records;
  Corpus corpus;
  GroundTruth truth;
  std::vector<std::pair<std::string, std::vector<double>>> embeddings;
  // Per record: (concept name, confidence) sorted by confidence descending.
  std::vector<std::vector<std::pair<std::string, double>>> concepts;
};

// Catalog of `classes` distinct single-codepoint pictographs whose
// description term is the class signature token.
EmojiCatalog synthetic_catalog(std::size_t classes);
std::string signature_token(std::size_t c);

// Throws std::invalid_argument unless classes >= 2 and docs >= classes.
SyntheticData generate_synthetic(const SynthConfig& config, std::uint64_t seed);

}  // namespace emojimodal
