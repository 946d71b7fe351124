#include "emojimodal/zeroshot.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "emojimodal/corpus.hpp"
#include "emojimodal/error.hpp"
#include "emojimodal/tokenizer.hpp"

namespace emojimodal {
namespace {

bool parse_double(std::string_view s, double& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(sep, pos);
    if (end == std::string_view::npos) end = line.size();
    if (end > pos) parts.push_back(line.substr(pos, end - pos));
    pos = end + 1;
  }
  return parts;
}

std::optional<Vector> mean_of(std::span<const std::string> terms, const EmbeddingTable& table,
                              std::vector<std::string>* used) {
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(table.dim()));
  std::size_t found = 0;
  for (const auto& term : terms) {
    if (const Vector* v = table.find(term)) {
      sum += *v;
      ++found;
      if (used) used->push_back(term);
    }
  }
  if (found == 0) return std::nullopt;
  return Vector(sum / static_cast<double>(found));
}

}  // namespace

EmbeddingTable::EmbeddingTable(const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  for (const auto& [token, values] : rows) {
    if (dim_ == 0) dim_ = values.size();
    if (values.size() != dim_ || dim_ == 0) throw DataError("embedding for '" + token + "' has the wrong width");
    Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    if (!v.allFinite()) throw DataError("embedding for '" + token + "' is not finite");
    rows_.insert_or_assign(token, std::move(v));
  }
}

const Vector* EmbeddingTable::find(std::string_view token) const {
  const auto it = rows_.find(std::string(token));
  return it == rows_.end() ? nullptr : &it->second;
}

EmbeddingTable parse_embeddings(std::istream& in, const std::string& source) {
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto parts = split_on(line, ' ');
    if (parts.empty()) continue;
    if (parts.size() < 2) throw ParseError(source, line_no, "token without a vector");
    std::vector<double> values(parts.size() - 1);
    for (std::size_t i = 1; i < parts.size(); ++i) {
      if (!parse_double(parts[i], values[i - 1])) {
        throw ParseError(source, line_no, "bad number '" + std::string(parts[i]) + "'");
      }
    }
    if (dim == 0) dim = values.size();
    if (values.size() != dim) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(dim) + " values, found " + std::to_string(values.size()));
    }
    rows.emplace_back(std::string(parts[0]), std::move(values));
  }
  if (rows.empty()) throw DataError(source + ": embedding file is empty");
  return EmbeddingTable(rows);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings " + path.string());
  return parse_embeddings(in, path.string());
}

std::optional<EmojiPrototype> prototype_from_terms(ClassIndex c, std::span<const std::string> terms,
                                                   const EmbeddingTable& table) {
  EmojiPrototype proto{c, {}, {}};
  auto mean = mean_of(terms, table, &proto.source_terms);
  if (!mean) return std::nullopt;
  proto.vector = std::move(*mean);
  return proto;
}

std::optional<EmojiPrototype> emoji_prototype(const EmojiEntry& entry, const EmbeddingTable& table) {
  std::vector<std::string> terms;
  std::string word;
  for (char ch : entry.name) {
    if (ch == ' ' || ch == '_' || ch == '-') {
      if (!word.empty()) terms.push_back(std::move(word));
      word.clear();
    } else {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!word.empty()) terms.push_back(std::move(word));
  terms.insert(terms.end(), entry.description_terms.begin(), entry.description_terms.end());
  return prototype_from_terms(entry.class_index, terms, table);
}

std::vector<EmojiPrototype> build_prototypes(const EmojiCatalog& catalog, const EmbeddingTable& table) {
  std::vector<EmojiPrototype> out;
  for (const EmojiEntry& e : catalog.entries()) {
    if (auto p = emoji_prototype(e, table)) out.push_back(std::move(*p));
  }
  return out;
}

std::optional<Vector> embed_text(std::string_view stripped_text, const EmbeddingTable& table) {
  const auto tokens = tokenize(stripped_text);
  return mean_of(tokens, table, nullptr);
}

std::optional<Vector> embed_image_concepts(const ConceptScores& concepts, const EmbeddingTable& table,
                                           std::size_t top_n) {
  if (top_n < 1) throw std::invalid_argument("top_n must be at least 1");
  std::vector<std::pair<const Vector*, double>> present;
  for (const auto& [name, conf] : concepts.concepts) {
    if (const Vector* v = table.find(name)) present.emplace_back(v, conf);
  }
  std::stable_sort(present.begin(), present.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (present.size() > top_n) present.resize(top_n);
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(table.dim()));
  double weight = 0.0;
  for (const auto& [v, conf] : present) {
    sum += conf * *v;
    weight += conf;
  }
  if (present.empty() || !(weight > 0.0)) return std::nullopt;
  return Vector(sum / weight);
}

std::map<std::string, ConceptScores> parse_concepts(std::istream& in, const std::string& source) {
  std::map<std::string, ConceptScores> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_on(line, '\t');
    if (fields.empty()) continue;
    ConceptScores scores;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const std::size_t colon = fields[i].rfind(':');
      double conf = 0.0;
      if (colon == std::string_view::npos || colon == 0 || !parse_double(fields[i].substr(colon + 1), conf) ||
          conf < 0.0) {
        throw ParseError(source, line_no, "expected name:confidence, got '" + std::string(fields[i]) + "'");
      }
      scores.concepts.emplace_back(std::string(fields[i].substr(0, colon)), conf);
    }
    out.insert_or_assign(std::string(fields[0]), std::move(scores));
  }
  return out;
}

std::map<std::string, ConceptScores> load_concepts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open concept scores " + path.string());
  return parse_concepts(in, path.string());
}

ScoreVector zeroshot_scores(const Vector& input, std::span<const EmojiPrototype> prototypes, std::size_t num_classes,
                            Similarity similarity) {
  const double input_norm = input.norm();
  if (!(input_norm > 0.0)) throw std::invalid_argument("zero-shot input vector is zero");
  ScoreVector scores = ScoreVector::Constant(static_cast<Eigen::Index>(num_classes), kMissingPrototypeScore);
  for (const EmojiPrototype& p : prototypes) {
    if (p.class_index >= num_classes) throw std::out_of_range("prototype class outside the catalog");
    if (p.vector.size() != input.size()) throw std::invalid_argument("prototype width differs from input");
    double s = input.dot(p.vector);
    if (similarity == Similarity::kCosine) {
      const double pn = p.vector.norm();
      s = pn > 0.0 ? std::clamp(s / (input_norm * pn), -1.0, 1.0) : 0.0;
    }
    scores(p.class_index) = s;
  }
  return scores;
}

ScoreVector zeroshot_fused(const std::optional<ScoreVector>& text_sim, const std::optional<ScoreVector>& image_sim,
                           std::span<const EmojiPrototype> prototypes, double alpha) {
  if (!text_sim && !image_sim) throw std::invalid_argument("zero-shot fusion needs at least one modality");
  if (!image_sim) return *text_sim;
  if (!text_sim) return *image_sim;
  if (text_sim->size() != image_sim->size()) throw std::invalid_argument("similarity vectors differ in length");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("fusion alpha must be in [0, 1]");

  auto normalized = [&](const ScoreVector& s) {
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (const EmojiPrototype& p : prototypes) {
      const double v = s(p.class_index);
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
    ScoreVector out = ScoreVector::Zero(s.size());
    if (any && hi > lo) {
      for (const EmojiPrototype& p : prototypes) out(p.class_index) = (s(p.class_index) - lo) / (hi - lo);
    }
    return out;
  };
  ScoreVector fused = alpha * normalized(*text_sim) + (1.0 - alpha) * normalized(*image_sim);
  std::vector<bool> has(static_cast<std::size_t>(fused.size()), false);
  for (const EmojiPrototype& p : prototypes) has[p.class_index] = true;
  for (Eigen::Index c = 0; c < fused.size(); ++c) {
    if (!has[static_cast<std::size_t>(c)]) fused(c) = kMissingPrototypeScore;
  }
  return fused;
}

ScoreMatrix score_zeroshot(const Corpus& corpus, const EmbeddingTable& table,
                           std::span<const EmojiPrototype> prototypes,
                           const std::map<std::string, ConceptScores>* concepts, ZeroShotMode mode,
                           std::size_t top_n) {
  const std::size_t C = corpus.num_classes();
  ScoreMatrix scores = ScoreMatrix::Constant(static_cast<Eigen::Index>(corpus.size()), static_cast<Eigen::Index>(C),
                                             kMissingPrototypeScore);
  auto usable = [](const std::optional<Vector>& v) { return v && v->norm() > 0.0; };
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Document& doc = corpus[i];
    std::optional<ScoreVector> text_sim, image_sim;
    if (mode != ZeroShotMode::kImage) {
      if (auto v = embed_text(doc.stripped_text, table); usable(v)) text_sim = zeroshot_scores(*v, prototypes, C);
    }
    if (mode != ZeroShotMode::kText && concepts) {
      if (const auto it = concepts->find(doc.id); it != concepts->end()) {
        if (auto v = embed_image_concepts(it->second, table, top_n); usable(v)) {
          image_sim = zeroshot_scores(*v, prototypes, C);
        }
      }
    }
    if (!text_sim && !image_sim) continue;
    scores.row(static_cast<Eigen::Index>(i)) = zeroshot_fused(text_sim, image_sim, prototypes).transpose();
  }
  return scores;
}

}  // namespace emojimodal
