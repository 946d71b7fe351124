#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emojimodal/linalg.hpp"

namespace emojimodal {

class Corpus;
struct TextModel;
struct LinearSoftmaxModel;

// Weight of the text modality, in [0, 1].
class FusionWeight {
 public:
  // Throws std::invalid_argument outside [0, 1].
  explicit FusionWeight(double alpha);
  double value() const { return alpha_; }

 private:
  double alpha_;
};

// alpha * p_text + (1 - alpha) * p_image. Throws std::invalid_argument on a
// length mismatch.
ScoreVector fuse(const ScoreVector& text, const ScoreVector& image, FusionWeight alpha);
ScoreMatrix fuse(const ScoreMatrix& text, const ScoreMatrix& image, FusionWeight alpha);

// 0, step, 2*step, ... up to `hi` inclusive.
std::vector<double> alpha_grid(double lo, double hi, double step);

struct AlphaSweep {
  double best_alpha = 0.0;
  double best_msap = 0.0;
  std::vector<std::pair<double, double>> curve;  // (alpha, msAP) in grid order
};

// msAP of the fused scores at each grid point; ties go to the smaller alpha.
AlphaSweep sweep_alpha(const ScoreMatrix& text_scores, const ScoreMatrix& image_scores,
                       const RelevanceMatrix& relevance, std::span<const double> grid);
AlphaSweep sweep_alpha(const Corpus& validation, const TextModel& text_model, const LinearSoftmaxModel& image_model,
                       std::span<const double> grid);

// "alpha<TAB>msap" rows with a header line.
std::string format_sweep_table(const AlphaSweep& sweep);

}  // namespace emojimodal
