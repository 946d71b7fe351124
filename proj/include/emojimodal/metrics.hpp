#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emojimodal/linalg.hpp"

namespace emojimodal {

class Corpus;

// N x C scores with matching binary relevance. Every relevance row must
// contain at least one relevant class.
struct EvalBatch {
  ScoreMatrix scores;
  RelevanceMatrix relevance;

  // Throws std::invalid_argument on shape mismatch or an all-zero row.
  void validate() const;
  std::size_t rows() const { return static_cast<std::size_t>(scores.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(scores.cols()); }
};

RelevanceMatrix relevance_matrix(const Corpus& corpus);

// Indices ordered by score descending; equal scores by ascending index.
std::vector<std::size_t> rank_order(std::span<const double> scores);

// Fraction of rows with at least one relevant class among the k best.
double top_k_accuracy(const EvalBatch& batch, std::size_t k);

// Average precision of one ranking; throws std::invalid_argument when no
// entry is relevant.
double samplewise_ap(std::span<const double> scores, std::span<const std::uint8_t> relevance);

double msap(const EvalBatch& batch);

struct QueryMap {
  double map = 0.0;
  // One entry per class; empty for classes without relevant documents.
  std::vector<std::optional<double>> per_query;
  std::vector<std::size_t> excluded;
};

// Per class: rank documents by that class's score column (ties by document
// index), AP against the relevance column; mean over classes with at least
// one relevant document. Throws std::invalid_argument if none qualifies.
QueryMap map_per_query(const ScoreMatrix& scores, const RelevanceMatrix& relevance);
inline QueryMap map_per_query(const EvalBatch& batch) { return map_per_query(batch.scores, batch.relevance); }

struct MetricRecord {
  std::string name;
  std::optional<std::size_t> k;
  double value;
  std::size_t n;
  std::size_t c;
};

// Top-k for each k (clamped to C) followed by msAP.
std::vector<MetricRecord> prediction_report(const EvalBatch& batch, std::span<const std::size_t> ks);

// "top_1=0.950000" lines.
std::string format_report_text(std::span<const MetricRecord> records);
// One JSON object per line: {"name","k","value","N","C"}.
std::string format_report_json(std::span<const MetricRecord> records);

}  // namespace emojimodal
