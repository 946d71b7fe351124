#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace emojimodal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
// Row-major so that a row (one document) is a contiguous span.
using ScoreMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RelevanceMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A distribution (or similarity profile) over all emoji classes for one input.
using ScoreVector = Eigen::VectorXd;

// Numerically stable softmax.
inline ScoreVector softmax(const Eigen::Ref<const Vector>& logits) {
  const double top = logits.maxCoeff();
  ScoreVector p = (logits.array() - top).exp().matrix();
  return p / p.sum();
}

}  // namespace emojimodal
