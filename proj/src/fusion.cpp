#include "emojimodal/fusion.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "emojimodal/corpus.hpp"
#include "emojimodal/metrics.hpp"
#include "emojimodal/text_model.hpp"
#include "emojimodal/vision_model.hpp"

namespace emojimodal {

FusionWeight::FusionWeight(double alpha) : alpha_(alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("fusion alpha must be in [0, 1]");
}

ScoreVector fuse(const ScoreVector& text, const ScoreVector& image, FusionWeight alpha) {
  if (text.size() != image.size()) throw std::invalid_argument("fused score vectors differ in length");
  const double a = alpha.value();
  return a * text + (1.0 - a) * image;
}

ScoreMatrix fuse(const ScoreMatrix& text, const ScoreMatrix& image, FusionWeight alpha) {
  if (text.rows() != image.rows() || text.cols() != image.cols()) {
    throw std::invalid_argument("fused score matrices differ in shape");
  }
  const double a = alpha.value();
  return a * text + (1.0 - a) * image;
}

std::vector<double> alpha_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || lo > hi || lo < 0.0 || hi > 1.0) throw std::invalid_argument("bad alpha grid");
  std::vector<double> grid;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= count; ++i) grid.push_back(std::min(hi, lo + static_cast<double>(i) * step));
  return grid;
}

AlphaSweep sweep_alpha(const ScoreMatrix& text_scores, const ScoreMatrix& image_scores,
                       const RelevanceMatrix& relevance, std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("alpha grid is empty");
  AlphaSweep out;
  bool first = true;
  for (double a : grid) {
    const double value = msap(EvalBatch{fuse(text_scores, image_scores, FusionWeight(a)), relevance});
    out.curve.emplace_back(a, value);
    if (first || value > out.best_msap || (value == out.best_msap && a < out.best_alpha)) {
      out.best_alpha = a;
      out.best_msap = value;
      first = false;
    }
  }
  return out;
}

AlphaSweep sweep_alpha(const Corpus& validation, const TextModel& text_model, const LinearSoftmaxModel& image_model,
                       std::span<const double> grid) {
  return sweep_alpha(score_texts(text_model, validation), score_images(image_model, validation),
                     relevance_matrix(validation), grid);
}

std::string format_sweep_table(const AlphaSweep& sweep) {
  std::ostringstream out;
  out << "alpha\tmsap\n";
  char buf[64];
  for (const auto& [a, v] : sweep.curve) {
    std::snprintf(buf, sizeof(buf), "%.4f\t%.6f\n", a, v);
    out << buf;
  }
  return out.str();
}

}  // namespace emojimodal
