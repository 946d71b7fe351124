#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "emojimodal/corpus.hpp"
#include "emojimodal/linalg.hpp"
#include "emojimodal/training.hpp"

namespace emojimodal {

// Softmax layer over frozen image features.
struct LinearSoftmaxModel {
  Matrix weights;  // d_img x C
  Vector bias;     // C

  static LinearSoftmaxModel zeros(std::size_t image_dim, std::size_t classes);
  std::size_t image_dim() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(bias.size()); }
};

// softmax(W^T f + b). Throws std::invalid_argument on a length mismatch.
ScoreVector predict_image(const LinearSoftmaxModel& model, std::span<const double> features);

struct ImageExample {
  std::span<const double> features;
  std::span<const ClassIndex> labels;
};

// Mean cross-entropy against y/|y| plus (l2/2) * ||W||^2.
double image_loss(const LinearSoftmaxModel& model, std::span<const ImageExample> batch, double l2);

struct LinearGradients {
  double loss = 0.0;
  LinearSoftmaxModel grads;
};

LinearGradients image_gradients(const LinearSoftmaxModel& model, std::span<const ImageExample> batch, double l2);

std::vector<ImageExample> make_image_examples(const Corpus& corpus);
ScoreMatrix score_images(const LinearSoftmaxModel& model, const Corpus& corpus);

inline constexpr double kDefaultImageL2 = 1e-4;

// Same SGD / clipping / early-stopping contract as the text model. Throws
// std::invalid_argument if a document lacks image features.
TrainResult<LinearSoftmaxModel> train_image_head(const Corpus& train, const Corpus& validation,
                                                 const BalancedSampler& sampler, const TrainConfig& config);
TrainResult<LinearSoftmaxModel> train_image_head(const Corpus& train, const Corpus& validation,
                                                 const TrainConfig& config);

// Checkpoint, magic "EMJV1": version, d_img, C, row-major W, b.
void save_image_model(const LinearSoftmaxModel& model, std::ostream& out);
void save_image_model(const LinearSoftmaxModel& model, const std::filesystem::path& path);
LinearSoftmaxModel load_image_model(std::istream& in, const std::string& source);
LinearSoftmaxModel load_image_model(const std::filesystem::path& path);

}  // namespace emojimodal
