#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "emojimodal/emoji_core.hpp"

namespace emojimodal {

using FeatureVector = std::vector<double>;

// 64-bit FNV-1a over the feature vector quantized to 1e-6.
std::uint64_t feature_hash(std::span<const double> features);

struct Document {
  std::string id;
  std::string stripped_text;
  std::vector<ClassIndex> labels;          // annotation set: sorted, unique
  std::vector<ClassIndex> label_multiset;  // extraction order, with repeats
  std::optional<FeatureVector> image_features;
  std::uint64_t image_hash = 0;

  bool has_image() const { return image_features.has_value(); }
  // Multi-hot y_i of length num_classes.
  std::vector<std::uint8_t> annotation(std::size_t num_classes) const;
};

// Builds labels/label_multiset from the extracted classes and the feature hash.
Document make_document(std::string id, std::string stripped_text, std::vector<ClassIndex> multiset,
                       std::optional<FeatureVector> image_features = std::nullopt);

class Corpus {
 public:
  // Validates every document: non-empty labels inside the catalog, feature
  // length equal to image_dim. image_dim 0 means no document carries features.
  Corpus(std::shared_ptr<const EmojiCatalog> catalog, std::vector<Document> documents, std::size_t image_dim = 0);

  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }
  const Document& operator[](std::size_t i) const { return documents_[i]; }
  const std::vector<Document>& documents() const { return documents_; }
  const EmojiCatalog& catalog() const { return *catalog_; }
  const std::shared_ptr<const EmojiCatalog>& catalog_ptr() const { return catalog_; }
  std::size_t num_classes() const { return catalog_->size(); }
  std::size_t image_dim() const { return image_dim_; }

  // Documents carrying class j.
  const std::vector<std::size_t>& class_counts() const { return class_counts_; }
  // C(y_i): number of documents sharing document i's full annotation set.
  std::size_t annotation_set_count(std::size_t i) const { return annotation_set_counts_.at(documents_[i].labels); }
  const std::map<std::vector<ClassIndex>, std::size_t>& annotation_set_counts() const { return annotation_set_counts_; }

  Corpus subset(std::span<const std::size_t> indices) const;

 private:
  std::shared_ptr<const EmojiCatalog> catalog_;
  std::vector<Document> documents_;
  std::size_t image_dim_;
  std::vector<std::size_t> class_counts_;
  std::map<std::vector<ClassIndex>, std::size_t> annotation_set_counts_;
};

// One line of the corpus input: {"id", "text", "image_features"?}.
struct RawRecord {
  std::string id;
  std::string text;
  std::optional<FeatureVector> image_features;
  std::size_t line = 0;  // 1-based input line, 0 when built in memory
};

std::vector<RawRecord> parse_records(std::istream& in, const std::string& source);
void write_records(std::ostream& out, std::span<const RawRecord> records);

struct IngestOptions {
  // Required feature width; when unset the first feature-bearing record decides.
  std::optional<std::size_t> image_dim;
  SegmentOptions segment;
};

// Segments each record, drops records without catalog emoji and records whose
// NFC-normalized text was already seen. Output keeps input order.
Corpus ingest_records(std::span<const RawRecord> records, std::shared_ptr<const EmojiCatalog> catalog,
                      const IngestOptions& options = {});
Corpus ingest(const std::filesystem::path& path, std::shared_ptr<const EmojiCatalog> catalog,
              const IngestOptions& options = {});

struct SplitRatios {
  double train;
  double validation;
  double test;
};

struct CorpusSplits {
  Corpus train;
  Corpus validation;
  Corpus test;
};

// Random disjoint split; throws std::invalid_argument if a ratio is not
// positive, the ratios do not sum to 1, or a part would be empty.
CorpusSplits split(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed);

// Single greedy pass over shuffled documents keeping a document only while
// every class it carries is below `cap`.
Corpus balanced_test_subset(const Corpus& test, std::size_t cap, std::uint64_t seed);

// Keeps feature-bearing documents. A validation/test document whose feature
// hash occurs in train is dropped when a train document with that hash has
// the identical annotation set.
CorpusSplits image_subset(const CorpusSplits& splits);

// p(x_i) = C(y_i)^-1 / sum_k C(y_k)^-1.
std::vector<double> sampling_weights(const Corpus& corpus);

struct RngState {
  std::mt19937_64 engine;

  explicit RngState(std::uint64_t seed = 0) : engine(seed) {}
  bool operator==(const RngState&) const = default;
};

class BalancedSampler {
 public:
  explicit BalancedSampler(std::vector<double> weights, std::uint64_t seed = 0);
  explicit BalancedSampler(const Corpus& corpus, std::uint64_t seed = 0)
      : BalancedSampler(sampling_weights(corpus), seed) {}

  const std::vector<double>& weights() const { return weights_; }
  std::uint64_t seed() const { return seed_; }
  RngState initial_state() const { return RngState(seed_); }
  std::size_t draw(RngState& state) const;

 private:
  std::vector<double> weights_;
  std::uint64_t seed_;
  std::vector<double> cumulative_;
};

struct BatchDraw {
  std::vector<std::size_t> indices;
  RngState state;
};

// i.i.d. draws with replacement.
BatchDraw next_batch(const BalancedSampler& sampler, std::size_t batch_size, RngState state);

// Binary cache, magic "EMJC1". Layout documented in README.
void save_corpus(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(std::istream& in, std::shared_ptr<const EmojiCatalog> catalog, const std::string& source);
Corpus load_corpus(const std::filesystem::path& path, std::shared_ptr<const EmojiCatalog> catalog);

}  // namespace emojimodal
