#include "emojimodal/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "emojimodal/binary_io.hpp"
#include "emojimodal/error.hpp"

namespace emojimodal {

using nlohmann::json;

std::uint64_t feature_hash(std::span<const double> features) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : features) {
    const auto q = static_cast<std::int64_t>(std::llround(v * 1e6));
    auto bits = static_cast<std::uint64_t>(q);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::vector<std::uint8_t> Document::annotation(std::size_t num_classes) const {
  std::vector<std::uint8_t> y(num_classes, 0);
  for (ClassIndex c : labels) y.at(c) = 1;
  return y;
}

Document make_document(std::string id, std::string stripped_text, std::vector<ClassIndex> multiset,
                       std::optional<FeatureVector> image_features) {
  Document doc;
  doc.id = std::move(id);
  doc.stripped_text = std::move(stripped_text);
  doc.labels = multiset;
  std::sort(doc.labels.begin(), doc.labels.end());
  doc.labels.erase(std::unique(doc.labels.begin(), doc.labels.end()), doc.labels.end());
  doc.label_multiset = std::move(multiset);
  if (image_features) doc.image_hash = feature_hash(*image_features);
  doc.image_features = std::move(image_features);
  return doc;
}

Corpus::Corpus(std::shared_ptr<const EmojiCatalog> catalog, std::vector<Document> documents, std::size_t image_dim)
    : catalog_(std::move(catalog)), documents_(std::move(documents)), image_dim_(image_dim) {
  if (!catalog_) throw std::invalid_argument("corpus requires a catalog");
  class_counts_.assign(catalog_->size(), 0);
  for (const Document& doc : documents_) {
    if (doc.labels.empty()) throw DataError("document " + doc.id + " has no annotation");
    for (ClassIndex c : doc.labels) {
      if (c >= catalog_->size()) throw DataError("document " + doc.id + " has class outside the catalog");
      ++class_counts_[c];
    }
    if (doc.image_features && doc.image_features->size() != image_dim_) {
      throw DataError("document " + doc.id + " has " + std::to_string(doc.image_features->size()) +
                      " image features, expected " + std::to_string(image_dim_));
    }
    ++annotation_set_counts_[doc.labels];
  }
}

Corpus Corpus::subset(std::span<const std::size_t> indices) const {
  std::vector<Document> docs;
  docs.reserve(indices.size());
  for (std::size_t i : indices) docs.push_back(documents_.at(i));
  return Corpus(catalog_, std::move(docs), image_dim_);
}

std::vector<RawRecord> parse_records(std::istream& in, const std::string& source) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      if (!obj.is_object()) throw DataError("expected a JSON object");
      RawRecord rec;
      rec.line = line_no;
      if (!obj.contains("id") || !obj["id"].is_string()) throw DataError("missing string field 'id'");
      if (!obj.contains("text") || !obj["text"].is_string()) throw DataError("missing string field 'text'");
      rec.id = obj["id"].get<std::string>();
      rec.text = obj["text"].get<std::string>();
      if (!unicode::is_valid_utf8(rec.text)) throw DataError("text is not valid UTF-8");
      if (obj.contains("image_features") && !obj["image_features"].is_null()) {
        const json& feats = obj["image_features"];
        if (!feats.is_array()) throw DataError("'image_features' must be an array");
        FeatureVector values;
        values.reserve(feats.size());
        for (const json& v : feats) {
          if (!v.is_number()) throw DataError("'image_features' must contain numbers");
          values.push_back(v.get<double>());
        }
        rec.image_features = std::move(values);
      }
      records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw ParseError(source, line_no, e.what());
    } catch (const DataError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return records;
}

void write_records(std::ostream& out, std::span<const RawRecord> records) {
  for (const RawRecord& rec : records) {
    json obj = {{"id", rec.id}, {"text", rec.text}};
    if (rec.image_features) obj["image_features"] = *rec.image_features;
    out << obj.dump() << '\n';
  }
}

namespace {

Corpus ingest_impl(std::span<const RawRecord> records, std::shared_ptr<const EmojiCatalog> catalog,
                   const IngestOptions& options, const std::string& source) {
  std::optional<std::size_t> image_dim = options.image_dim;
  std::unordered_set<std::string> seen;
  std::vector<Document> docs;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RawRecord& rec = records[i];
    const std::size_t line = rec.line != 0 ? rec.line : i + 1;
    if (rec.image_features) {
      if (!image_dim) image_dim = rec.image_features->size();
      if (rec.image_features->size() != *image_dim) {
        throw ParseError(source, line,
                         "image feature length " + std::to_string(rec.image_features->size()) + ", expected " +
                             std::to_string(*image_dim));
      }
    }
    Segmentation seg;
    try {
      seg = segment(rec.text, *catalog, options.segment);
    } catch (const DataError& e) {
      throw ParseError(source, line, e.what());
    }
    if (seg.matches.empty()) continue;
    if (!seen.insert(unicode::nfc(rec.text)).second) continue;
    docs.push_back(make_document(rec.id, std::move(seg.stripped_text), seg.classes(), rec.image_features));
  }
  return Corpus(std::move(catalog), std::move(docs), image_dim.value_or(0));
}

}  // namespace

Corpus ingest_records(std::span<const RawRecord> records, std::shared_ptr<const EmojiCatalog> catalog,
                      const IngestOptions& options) {
  return ingest_impl(records, std::move(catalog), options, "<records>");
}

Corpus ingest(const std::filesystem::path& path, std::shared_ptr<const EmojiCatalog> catalog,
              const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus input " + path.string());
  const auto records = parse_records(in, path.string());
  return ingest_impl(records, std::move(catalog), options, path.string());
}

CorpusSplits split(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0)) {
    throw std::invalid_argument("split ratios must all be positive");
  }
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.train));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.validation));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw std::invalid_argument("split of " + std::to_string(n) + " documents leaves an empty part");
  }
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  for (auto* part : {&train, &val, &test}) std::sort(part->begin(), part->end());
  return CorpusSplits{corpus.subset(train), corpus.subset(val), corpus.subset(test)};
}

Corpus balanced_test_subset(const Corpus& test, std::size_t cap, std::uint64_t seed) {
  if (cap < 1) throw std::invalid_argument("balanced subset cap must be at least 1");
  std::vector<std::size_t> order(test.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> used(test.num_classes(), 0);
  std::vector<std::size_t> keep;
  for (std::size_t i : order) {
    const auto& labels = test[i].labels;
    const bool fits = std::all_of(labels.begin(), labels.end(), [&](ClassIndex c) { return used[c] < cap; });
    if (!fits) continue;
    for (ClassIndex c : labels) ++used[c];
    keep.push_back(i);
  }
  std::sort(keep.begin(), keep.end());
  return test.subset(keep);
}

CorpusSplits image_subset(const CorpusSplits& splits) {
  auto with_images = [](const Corpus& c) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i].has_image()) keep.push_back(i);
    }
    return keep;
  };
  std::multimap<std::uint64_t, const std::vector<ClassIndex>*> train_images;
  for (const Document& doc : splits.train.documents()) {
    if (doc.has_image()) train_images.emplace(doc.image_hash, &doc.labels);
  }
  auto deduplicated = [&](const Corpus& c) {
    std::vector<std::size_t> keep;
    for (std::size_t i : with_images(c)) {
      const auto [lo, hi] = train_images.equal_range(c[i].image_hash);
      const bool same_annotation =
          std::any_of(lo, hi, [&](const auto& entry) { return *entry.second == c[i].labels; });
      if (!same_annotation) keep.push_back(i);
    }
    return keep;
  };
  const auto train_keep = with_images(splits.train);
  const auto val_keep = deduplicated(splits.validation);
  const auto test_keep = deduplicated(splits.test);
  return CorpusSplits{splits.train.subset(train_keep), splits.validation.subset(val_keep),
                      splits.test.subset(test_keep)};
}

std::vector<double> sampling_weights(const Corpus& corpus) {
  if (corpus.empty()) throw std::invalid_argument("sampling weights of an empty corpus");
  std::vector<double> weights(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    weights[i] = 1.0 / static_cast<double>(corpus.annotation_set_count(i));
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double& w : weights) w /= total;
  return weights;
}

BalancedSampler::BalancedSampler(std::vector<double> weights, std::uint64_t seed)
    : weights_(std::move(weights)), seed_(seed) {
  if (weights_.empty()) throw std::invalid_argument("sampler needs at least one weight");
  cumulative_.reserve(weights_.size());
  double running = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("sampler weights must be finite and >= 0");
    running += w;
    cumulative_.push_back(running);
  }
  if (!(running > 0.0)) throw std::invalid_argument("sampler weights sum to zero");
}

std::size_t BalancedSampler::draw(RngState& state) const {
  std::uniform_real_distribution<double> uniform(0.0, cumulative_.back());
  const double u = uniform(state.engine);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
}

BatchDraw next_batch(const BalancedSampler& sampler, std::size_t batch_size, RngState state) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  BatchDraw out{{}, std::move(state)};
  out.indices.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) out.indices.push_back(sampler.draw(out.state));
  return out;
}

// EMJC1 layout: magic, u32 version, u32 C, u32 d_img, u64 N, then N records
// of (u32 byte length, payload). Payload: id, text, u32 m, m x u32 class,
// u8 has_image, d_img x f64.
namespace {
constexpr std::string_view kCorpusMagic = "EMJC1";
constexpr std::uint32_t kCorpusVersion = 1;
}  // namespace

void save_corpus(const Corpus& corpus, std::ostream& out) {
  BinaryWriter w(out);
  w.magic(kCorpusMagic);
  w.u32(kCorpusVersion);
  w.u32(static_cast<std::uint32_t>(corpus.num_classes()));
  w.u32(static_cast<std::uint32_t>(corpus.image_dim()));
  w.u64(corpus.size());
  for (const Document& doc : corpus.documents()) {
    std::ostringstream payload;
    BinaryWriter p(payload);
    p.str(doc.id);
    p.str(doc.stripped_text);
    p.u32(static_cast<std::uint32_t>(doc.label_multiset.size()));
    for (ClassIndex c : doc.label_multiset) p.u32(c);
    p.u8(doc.has_image() ? 1 : 0);
    if (doc.image_features) p.f64s(*doc.image_features);
    const std::string bytes = payload.str();
    w.str(bytes);
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  save_corpus(corpus, out);
}

Corpus load_corpus(std::istream& in, std::shared_ptr<const EmojiCatalog> catalog, const std::string& source) {
  BinaryReader r(in, source);
  r.expect_magic(kCorpusMagic);
  if (const auto version = r.u32(); version != kCorpusVersion) {
    throw DataError(source + ": unsupported corpus version " + std::to_string(version));
  }
  const std::uint32_t num_classes = r.u32();
  if (num_classes != catalog->size()) {
    throw DataError(source + ": corpus has " + std::to_string(num_classes) + " classes, catalog has " +
                    std::to_string(catalog->size()));
  }
  const std::uint32_t image_dim = r.u32();
  const std::uint64_t n = r.u64();
  std::vector<Document> docs;
  docs.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::istringstream payload(r.str());
    BinaryReader p(payload, source);
    std::string id = p.str();
    std::string text = p.str();
    std::vector<ClassIndex> multiset(p.u32());
    for (auto& c : multiset) c = p.u32();
    std::optional<FeatureVector> features;
    if (p.u8() != 0) {
      features.emplace(image_dim);
      p.f64s(*features);
    }
    docs.push_back(make_document(std::move(id), std::move(text), std::move(multiset), std::move(features)));
  }
  return Corpus(std::move(catalog), std::move(docs), image_dim);
}

Corpus load_corpus(const std::filesystem::path& path, std::shared_ptr<const EmojiCatalog> catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + path.string());
  return load_corpus(in, std::move(catalog), path.string());
}

}  // namespace emojimodal
