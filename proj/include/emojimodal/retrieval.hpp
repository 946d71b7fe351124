#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "emojimodal/emoji_core.hpp"
#include "emojimodal/error.hpp"
#include "emojimodal/fusion.hpp"
#include "emojimodal/linalg.hpp"
#include "emojimodal/metrics.hpp"
#include "emojimodal/zeroshot.hpp"

namespace emojimodal {

class Corpus;
struct TextModel;
struct LinearSoftmaxModel;

// Immutable documents x emoji score matrix.
class ScoreIndex {
 public:
  ScoreIndex(std::vector<std::string> doc_ids, std::vector<std::string> snippets, std::vector<bool> has_image,
             ScoreMatrix scores, std::string scorer_tag, std::shared_ptr<const EmojiCatalog> catalog);

  std::size_t size() const { return doc_ids_.size(); }
  std::size_t num_classes() const { return static_cast<std::size_t>(scores_.cols()); }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const std::vector<std::string>& snippets() const { return snippets_; }
  const std::vector<bool>& has_image() const { return has_image_; }
  const ScoreMatrix& scores() const { return scores_; }
  const std::string& scorer_tag() const { return scorer_tag_; }
  const EmojiCatalog& catalog() const { return *catalog_; }
  const std::shared_ptr<const EmojiCatalog>& catalog_ptr() const { return catalog_; }

 private:
  std::vector<std::string> doc_ids_;
  std::vector<std::string> snippets_;
  std::vector<bool> has_image_;
  ScoreMatrix scores_;
  std::string scorer_tag_;
  std::shared_ptr<const EmojiCatalog> catalog_;
};

class DocumentScorer {
 public:
  virtual ~DocumentScorer() = default;
  virtual std::string tag() const = 0;
  // Throws std::invalid_argument when a document lacks the needed modality.
  virtual ScoreMatrix score(const Corpus& corpus) const = 0;
};

class TextScorer final : public DocumentScorer {
 public:
  explicit TextScorer(const TextModel& model) : model_(model) {}
  std::string tag() const override { return "text"; }
  ScoreMatrix score(const Corpus& corpus) const override;

 private:
  const TextModel& model_;
};

class ImageScorer final : public DocumentScorer {
 public:
  explicit ImageScorer(const LinearSoftmaxModel& model) : model_(model) {}
  std::string tag() const override { return "image"; }
  ScoreMatrix score(const Corpus& corpus) const override;

 private:
  const LinearSoftmaxModel& model_;
};

class FusedScorer final : public DocumentScorer {
 public:
  FusedScorer(const TextModel& text, const LinearSoftmaxModel& image, FusionWeight alpha)
      : text_(text), image_(image), alpha_(alpha) {}
  std::string tag() const override;
  ScoreMatrix score(const Corpus& corpus) const override;

 private:
  const TextModel& text_;
  const LinearSoftmaxModel& image_;
  FusionWeight alpha_;
};

class ZeroShotScorer final : public DocumentScorer {
 public:
  ZeroShotScorer(const EmbeddingTable& table, std::vector<EmojiPrototype> prototypes,
                 const std::map<std::string, ConceptScores>* concepts, ZeroShotMode mode)
      : table_(table), prototypes_(std::move(prototypes)), concepts_(concepts), mode_(mode) {}
  std::string tag() const override;
  ScoreMatrix score(const Corpus& corpus) const override;

 private:
  const EmbeddingTable& table_;
  std::vector<EmojiPrototype> prototypes_;
  const std::map<std::string, ConceptScores>* concepts_;
  ZeroShotMode mode_;
};

ScoreIndex build_index(const Corpus& corpus, const DocumentScorer& scorer);

class UnknownEmojiError : public DataError {
 public:
  explicit UnknownEmojiError(std::vector<std::string> sequences);
  const std::vector<std::string>& sequences() const { return sequences_; }

 private:
  std::vector<std::string> sequences_;
};

struct EmojiQuery {
  std::vector<ClassIndex> classes;  // distinct, in query order
  std::string raw;
};

// Extracts the emoji of `raw`. Throws UnknownEmojiError naming leftover
// non-space codepoints and DataError when no emoji is present.
EmojiQuery parse_query(std::string_view raw, const EmojiCatalog& catalog, const SegmentOptions& options = {});

enum class Combine { kGeometricMean, kMin, kMean };
Combine parse_combine(std::string_view name);
std::string_view combine_name(Combine combine);

inline constexpr double kScoreFloor = 1e-12;

// Score of one document for a query: the class score for singletons,
// otherwise the chosen combiner over member-class scores (geometric mean
// clamps scores to kScoreFloor first).
double combined_score(const ScoreIndex& index, std::size_t doc, const EmojiQuery& query, Combine combine);

struct RankedResult {
  std::string doc_id;
  double score;
  std::size_t rank;  // 1-based
  std::string snippet;
  bool has_image;
};

// Best top_k documents by combined score; ties by doc_id ascending.
std::vector<RankedResult> query(const ScoreIndex& index, const EmojiQuery& q, std::size_t top_k,
                                Combine combine = Combine::kGeometricMean);

// mAP over single-emoji queries with annotation presence as relevance.
QueryMap evaluate_retrieval(const ScoreIndex& index, const Corpus& corpus);

// Binary index file, magic "EMJX1".
void save_index(const ScoreIndex& index, const std::filesystem::path& path);
ScoreIndex load_index(const std::filesystem::path& path, std::shared_ptr<const EmojiCatalog> catalog);

}  // namespace emojimodal
