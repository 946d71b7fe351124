#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "emojimodal/emoji_core.hpp"
#include "emojimodal/linalg.hpp"

namespace emojimodal {

class Corpus;

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  // Throws DataError when vectors disagree in width or are non-finite.
  explicit EmbeddingTable(const std::vector<std::pair<std::string, std::vector<double>>>& rows);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  const Vector* find(std::string_view token) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Vector> rows_;
};

// "token v1 ... vd" per line. Throws ParseError (with the line) on an arity
// mismatch and DataError on an empty file.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
EmbeddingTable parse_embeddings(std::istream& in, const std::string& source);

struct EmojiPrototype {
  ClassIndex class_index;
  Vector vector;
  std::vector<std::string> source_terms;  // terms found in the table
};

// Mean vector of the entry's name words and description terms present in
// the table; nullopt when none is.
std::optional<EmojiPrototype> emoji_prototype(const EmojiEntry& entry, const EmbeddingTable& table);
// Mean of the given terms' vectors.
std::optional<EmojiPrototype> prototype_from_terms(ClassIndex c, std::span<const std::string> terms,
                                                   const EmbeddingTable& table);
std::vector<EmojiPrototype> build_prototypes(const EmojiCatalog& catalog, const EmbeddingTable& table);

// Unweighted mean of the in-table tokens of the text (tokenized like the
// text model).
std::optional<Vector> embed_text(std::string_view stripped_text, const EmbeddingTable& table);

struct ConceptScores {
  std::vector<std::pair<std::string, double>> concepts;  // (name, confidence)
};

inline constexpr std::size_t kDefaultTopConcepts = 10;

// Confidence-weighted mean over the top_n in-table concepts.
std::optional<Vector> embed_image_concepts(const ConceptScores& concepts, const EmbeddingTable& table,
                                           std::size_t top_n = kDefaultTopConcepts);

// "<doc id>\tname:conf\tname:conf..." per line.
std::map<std::string, ConceptScores> load_concepts(const std::filesystem::path& path);
std::map<std::string, ConceptScores> parse_concepts(std::istream& in, const std::string& source);

enum class Similarity { kCosine, kDot };

inline constexpr double kMissingPrototypeScore = -1.0;

// Per-class similarity to the input; classes without a prototype score -1.
// Not a distribution. Throws std::invalid_argument on a zero input vector.
ScoreVector zeroshot_scores(const Vector& input, std::span<const EmojiPrototype> prototypes,
                            std::size_t num_classes, Similarity similarity = Similarity::kCosine);

inline constexpr double kZeroShotAlpha = 0.5;

// Min-max normalizes each present modality over classes with a prototype,
// then combines as alpha * text + (1 - alpha) * image. A missing modality
// returns the other unchanged. Classes without a prototype stay at -1.
// Throws std::invalid_argument on length mismatch or when both are absent.
ScoreVector zeroshot_fused(const std::optional<ScoreVector>& text_sim, const std::optional<ScoreVector>& image_sim,
                           std::span<const EmojiPrototype> prototypes, double alpha = kZeroShotAlpha);

enum class ZeroShotMode { kText, kImage, kFused };

// Scores every document. Documents with no usable modality get all -1.
ScoreMatrix score_zeroshot(const Corpus& corpus, const EmbeddingTable& table,
                           std::span<const EmojiPrototype> prototypes,
                           const std::map<std::string, ConceptScores>* concepts, ZeroShotMode mode,
                           std::size_t top_n = kDefaultTopConcepts);

}  // namespace emojimodal
