#include "emojimodal/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "emojimodal/binary_io.hpp"
#include "emojimodal/corpus.hpp"
#include "emojimodal/error.hpp"
#include "emojimodal/text_model.hpp"
#include "emojimodal/vision_model.hpp"

namespace emojimodal {

ScoreIndex::ScoreIndex(std::vector<std::string> doc_ids, std::vector<std::string> snippets, std::vector<bool> has_image,
                       ScoreMatrix scores, std::string scorer_tag, std::shared_ptr<const EmojiCatalog> catalog)
    : doc_ids_(std::move(doc_ids)),
      snippets_(std::move(snippets)),
      has_image_(std::move(has_image)),
      scores_(std::move(scores)),
      scorer_tag_(std::move(scorer_tag)),
      catalog_(std::move(catalog)) {
  const auto n = static_cast<Eigen::Index>(doc_ids_.size());
  if (!catalog_) throw std::invalid_argument("score index requires a catalog");
  if (snippets_.size() != doc_ids_.size() || has_image_.size() != doc_ids_.size() || scores_.rows() != n ||
      scores_.cols() != static_cast<Eigen::Index>(catalog_->size())) {
    throw std::invalid_argument("score index shapes are inconsistent");
  }
}

ScoreMatrix TextScorer::score(const Corpus& corpus) const { return score_texts(model_, corpus); }

ScoreMatrix ImageScorer::score(const Corpus& corpus) const { return score_images(model_, corpus); }

std::string FusedScorer::tag() const { return "fused:" + std::to_string(alpha_.value()); }

ScoreMatrix FusedScorer::score(const Corpus& corpus) const {
  return fuse(score_texts(text_, corpus), score_images(image_, corpus), alpha_);
}

std::string ZeroShotScorer::tag() const {
  switch (mode_) {
    case ZeroShotMode::kText:
      return "zeroshot:text";
    case ZeroShotMode::kImage:
      return "zeroshot:image";
    case ZeroShotMode::kFused:
      break;
  }
  return "zeroshot:fused";
}

ScoreMatrix ZeroShotScorer::score(const Corpus& corpus) const {
  if (mode_ != ZeroShotMode::kText && concepts_ == nullptr) {
    throw std::invalid_argument("zero-shot image scoring needs concept scores");
  }
  return score_zeroshot(corpus, table_, prototypes_, concepts_, mode_);
}

ScoreIndex build_index(const Corpus& corpus, const DocumentScorer& scorer) {
  std::vector<std::string> ids, snippets;
  std::vector<bool> has_image;
  for (const Document& doc : corpus.documents()) {
    ids.push_back(doc.id);
    snippets.push_back(doc.stripped_text);
    has_image.push_back(doc.has_image());
  }
  return ScoreIndex(std::move(ids), std::move(snippets), std::move(has_image), scorer.score(corpus), scorer.tag(),
                    corpus.catalog_ptr());
}

namespace {

std::string join_unknown(const std::vector<std::string>& sequences) {
  std::string out = "unknown emoji in query:";
  for (const auto& s : sequences) out += " " + s;
  return out;
}

}  // namespace

UnknownEmojiError::UnknownEmojiError(std::vector<std::string> sequences)
    : DataError(join_unknown(sequences)), sequences_(std::move(sequences)) {}

EmojiQuery parse_query(std::string_view raw, const EmojiCatalog& catalog, const SegmentOptions& options) {
  const Segmentation seg = segment(raw, catalog, options);
  std::vector<std::string> unknown;
  unicode::Codepoints run;
  auto flush = [&] {
    if (!run.empty()) unknown.push_back("U+" + unicode::to_hex_sequence(run));
    run.clear();
  };
  for (char32_t c : unicode::decode_utf8(seg.stripped_text)) {
    if (unicode::is_space(c) || c == U'+' || c == U',') {
      flush();
    } else {
      run.push_back(c);
    }
  }
  flush();
  if (!unknown.empty()) throw UnknownEmojiError(std::move(unknown));
  EmojiQuery q;
  q.raw = std::string(raw);
  for (ClassIndex c : seg.classes()) {
    if (std::find(q.classes.begin(), q.classes.end(), c) == q.classes.end()) q.classes.push_back(c);
  }
  if (q.classes.empty()) throw DataError("query contains no emoji");
  return q;
}

Combine parse_combine(std::string_view name) {
  if (name == "geo") return Combine::kGeometricMean;
  if (name == "min") return Combine::kMin;
  if (name == "mean") return Combine::kMean;
  throw std::invalid_argument("unknown combine mode '" + std::string(name) + "' (geo|min|mean)");
}

std::string_view combine_name(Combine combine) {
  switch (combine) {
    case Combine::kMin:
      return "min";
    case Combine::kMean:
      return "mean";
    case Combine::kGeometricMean:
      break;
  }
  return "geo";
}

double combined_score(const ScoreIndex& index, std::size_t doc, const EmojiQuery& query, Combine combine) {
  const auto row = static_cast<Eigen::Index>(doc);
  for (ClassIndex c : query.classes) {
    if (c >= index.num_classes()) throw std::out_of_range("query class outside the index");
  }
  if (query.classes.size() == 1) return index.scores()(row, query.classes.front());
  switch (combine) {
    case Combine::kMin: {
      double m = index.scores()(row, query.classes.front());
      for (ClassIndex c : query.classes) m = std::min(m, index.scores()(row, c));
      return m;
    }
    case Combine::kMean: {
      double s = 0.0;
      for (ClassIndex c : query.classes) s += index.scores()(row, c);
      return s / static_cast<double>(query.classes.size());
    }
    case Combine::kGeometricMean:
      break;
  }
  double log_sum = 0.0;
  for (ClassIndex c : query.classes) log_sum += std::log(std::max(index.scores()(row, c), kScoreFloor));
  return std::exp(log_sum / static_cast<double>(query.classes.size()));
}

std::vector<RankedResult> query(const ScoreIndex& index, const EmojiQuery& q, std::size_t top_k, Combine combine) {
  if (top_k < 1) throw std::invalid_argument("top_k must be at least 1");
  if (q.classes.empty()) throw std::invalid_argument("empty query");
  std::vector<double> scores(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) scores[i] = combined_score(index, i, q, combine);
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min(top_k, order.size());
  const auto& ids = index.doc_ids();
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      if (ids[a] != ids[b]) return ids[a] < ids[b];
                      return a < b;
                    });
  std::vector<RankedResult> out;
  out.reserve(k);
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = order[r];
    out.push_back({ids[i], scores[i], r + 1, index.snippets()[i], index.has_image()[i]});
  }
  return out;
}

QueryMap evaluate_retrieval(const ScoreIndex& index, const Corpus& corpus) {
  if (corpus.size() != index.size() || corpus.num_classes() != index.num_classes()) {
    throw std::invalid_argument("index and corpus differ in shape");
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].id != index.doc_ids()[i]) throw std::invalid_argument("index and corpus document order differ");
  }
  return map_per_query(index.scores(), relevance_matrix(corpus));
}

namespace {
constexpr std::string_view kIndexMagic = "EMJX1";
constexpr std::uint32_t kIndexVersion = 1;
}  // namespace

void save_index(const ScoreIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  BinaryWriter w(out);
  w.magic(kIndexMagic);
  w.u32(kIndexVersion);
  w.str(index.scorer_tag());
  w.u32(static_cast<std::uint32_t>(index.num_classes()));
  w.u64(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    w.str(index.doc_ids()[i]);
    w.str(index.snippets()[i]);
    w.u8(index.has_image()[i] ? 1 : 0);
    for (Eigen::Index c = 0; c < index.scores().cols(); ++c) w.f64(index.scores()(static_cast<Eigen::Index>(i), c));
  }
}

ScoreIndex load_index(const std::filesystem::path& path, std::shared_ptr<const EmojiCatalog> catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open index " + path.string());
  BinaryReader r(in, path.string());
  r.expect_magic(kIndexMagic);
  if (const auto version = r.u32(); version != kIndexVersion) {
    throw DataError(path.string() + ": unsupported index version " + std::to_string(version));
  }
  std::string tag = r.str();
  const std::uint32_t classes = r.u32();
  if (classes != catalog->size()) throw DataError(path.string() + ": index class count differs from catalog");
  const std::uint64_t n = r.u64();
  std::vector<std::string> ids, snippets;
  std::vector<bool> has_image;
  ScoreMatrix scores(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(classes));
  for (std::uint64_t i = 0; i < n; ++i) {
    ids.push_back(r.str());
    snippets.push_back(r.str());
    has_image.push_back(r.u8() != 0);
    for (Eigen::Index c = 0; c < scores.cols(); ++c) scores(static_cast<Eigen::Index>(i), c) = r.f64();
  }
  return ScoreIndex(std::move(ids), std::move(snippets), std::move(has_image), std::move(scores), std::move(tag),
                    std::move(catalog));
}

}  // namespace emojimodal
