#include "emojimodal/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "emojimodal/corpus.hpp"

namespace emojimodal {
namespace {

auto ranking_less(std::span<const double> scores) {
  return [scores](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
}

std::span<const double> row_of(const ScoreMatrix& m, std::size_t i) {
  return {m.data() + i * static_cast<std::size_t>(m.cols()), static_cast<std::size_t>(m.cols())};
}

std::span<const std::uint8_t> row_of(const RelevanceMatrix& m, std::size_t i) {
  return {m.data() + i * static_cast<std::size_t>(m.cols()), static_cast<std::size_t>(m.cols())};
}

}  // namespace

void EvalBatch::validate() const {
  if (scores.rows() != relevance.rows() || scores.cols() != relevance.cols()) {
    throw std::invalid_argument("score and relevance shapes differ");
  }
  for (Eigen::Index i = 0; i < relevance.rows(); ++i) {
    if ((relevance.row(i).array() != 0).count() == 0) {
      throw std::invalid_argument("sample " + std::to_string(i) + " has no relevant class");
    }
  }
}

RelevanceMatrix relevance_matrix(const Corpus& corpus) {
  RelevanceMatrix y = RelevanceMatrix::Zero(static_cast<Eigen::Index>(corpus.size()),
                                            static_cast<Eigen::Index>(corpus.num_classes()));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (ClassIndex c : corpus[i].labels) y(static_cast<Eigen::Index>(i), c) = 1;
  }
  return y;
}

std::vector<std::size_t> rank_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), ranking_less(scores));
  return order;
}

double top_k_accuracy(const EvalBatch& batch, std::size_t k) {
  batch.validate();
  if (k < 1 || k > batch.cols()) throw std::invalid_argument("k must be in [1, C]");
  if (batch.rows() == 0) throw std::invalid_argument("top-k of an empty batch");
  std::size_t hits = 0;
  std::vector<std::size_t> order(batch.cols());
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    const auto scores = row_of(batch.scores, i);
    const auto rel = row_of(batch.relevance, i);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      ranking_less(scores));
    if (std::any_of(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                    [&](std::size_t c) { return rel[c] != 0; })) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(batch.rows());
}

double samplewise_ap(std::span<const double> scores, std::span<const std::uint8_t> relevance) {
  if (scores.size() != relevance.size()) throw std::invalid_argument("score and relevance lengths differ");
  const auto order = rank_order(scores);
  std::size_t found = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (relevance[order[r]] != 0) {
      ++found;
      sum += static_cast<double>(found) / static_cast<double>(r + 1);
    }
  }
  if (found == 0) throw std::invalid_argument("average precision needs at least one relevant entry");
  return sum / static_cast<double>(found);
}

double msap(const EvalBatch& batch) {
  batch.validate();
  if (batch.rows() == 0) throw std::invalid_argument("msAP of an empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    sum += samplewise_ap(row_of(batch.scores, i), row_of(batch.relevance, i));
  }
  return sum / static_cast<double>(batch.rows());
}

QueryMap map_per_query(const ScoreMatrix& scores, const RelevanceMatrix& relevance) {
  if (scores.rows() != relevance.rows() || scores.cols() != relevance.cols()) {
    throw std::invalid_argument("score and relevance shapes differ");
  }
  QueryMap out;
  out.per_query.resize(static_cast<std::size_t>(scores.cols()));
  std::vector<double> column(static_cast<std::size_t>(scores.rows()));
  std::vector<std::uint8_t> rel(column.size());
  double sum = 0.0;
  std::size_t included = 0;
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      column[static_cast<std::size_t>(i)] = scores(i, c);
      rel[static_cast<std::size_t>(i)] = relevance(i, c);
    }
    if (std::none_of(rel.begin(), rel.end(), [](std::uint8_t v) { return v != 0; })) {
      out.excluded.push_back(static_cast<std::size_t>(c));
      continue;
    }
    const double ap = samplewise_ap(column, rel);
    out.per_query[static_cast<std::size_t>(c)] = ap;
    sum += ap;
    ++included;
  }
  if (included == 0) throw std::invalid_argument("no query has a relevant document");
  out.map = sum / static_cast<double>(included);
  return out;
}

std::vector<MetricRecord> prediction_report(const EvalBatch& batch, std::span<const std::size_t> ks) {
  std::vector<MetricRecord> records;
  for (std::size_t k : ks) {
    const std::size_t kk = std::clamp<std::size_t>(k, 1, batch.cols());
    records.push_back({"top_" + std::to_string(kk), kk, top_k_accuracy(batch, kk), batch.rows(), batch.cols()});
  }
  records.push_back({"msap", std::nullopt, msap(batch), batch.rows(), batch.cols()});
  return records;
}

std::string format_report_text(std::span<const MetricRecord> records) {
  std::ostringstream out;
  char buf[64];
  for (const MetricRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.value);
    out << r.name << '=' << buf << '\n';
  }
  return out.str();
}

std::string format_report_json(std::span<const MetricRecord> records) {
  std::ostringstream out;
  for (const MetricRecord& r : records) {
    nlohmann::ordered_json obj;
    obj["name"] = r.name;
    obj["k"] = r.k ? nlohmann::ordered_json(*r.k) : nlohmann::ordered_json(nullptr);
    obj["value"] = r.value;
    obj["N"] = r.n;
    obj["C"] = r.c;
    out << obj.dump() << '\n';
  }
  return out.str();
}

}  // namespace emojimodal
