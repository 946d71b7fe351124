#include "emojimodal/vision_model.hpp"

#include <fstream>
#include <stdexcept>

#include "emojimodal/binary_io.hpp"
#include "emojimodal/error.hpp"
#include "emojimodal/metrics.hpp"

namespace emojimodal {
namespace {

Vector logits_of(const LinearSoftmaxModel& model, std::span<const double> features) {
  if (features.size() != model.image_dim()) {
    throw std::invalid_argument("image feature length " + std::to_string(features.size()) + ", model expects " +
                                std::to_string(model.image_dim()));
  }
  const Eigen::Map<const Vector> f(features.data(), static_cast<Eigen::Index>(features.size()));
  return model.weights.transpose() * f + model.bias;
}

void require_features(const Corpus& corpus) {
  for (const Document& doc : corpus.documents()) {
    if (!doc.has_image()) throw std::invalid_argument("document " + doc.id + " has no image features");
  }
}

}  // namespace

LinearSoftmaxModel LinearSoftmaxModel::zeros(std::size_t image_dim, std::size_t classes) {
  return {Matrix::Zero(static_cast<Eigen::Index>(image_dim), static_cast<Eigen::Index>(classes)),
          Vector::Zero(static_cast<Eigen::Index>(classes))};
}

ScoreVector predict_image(const LinearSoftmaxModel& model, std::span<const double> features) {
  return softmax(logits_of(model, features));
}

double image_loss(const LinearSoftmaxModel& model, std::span<const ImageExample> batch, double l2) {
  if (batch.empty()) throw std::invalid_argument("loss of an empty batch");
  double total = 0.0;
  for (const ImageExample& ex : batch) {
    const ScoreVector p = softmax(logits_of(model, ex.features));
    for (ClassIndex c : ex.labels) total -= std::log(p(c)) / static_cast<double>(ex.labels.size());
  }
  return total / static_cast<double>(batch.size()) + 0.5 * l2 * model.weights.squaredNorm();
}

LinearGradients image_gradients(const LinearSoftmaxModel& model, std::span<const ImageExample> batch, double l2) {
  if (batch.empty()) throw std::invalid_argument("gradient of an empty batch");
  LinearGradients out{0.0, LinearSoftmaxModel::zeros(model.image_dim(), model.num_classes())};
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (const ImageExample& ex : batch) {
    if (ex.labels.empty()) throw std::invalid_argument("training example without labels");
    Vector d = softmax(logits_of(model, ex.features));
    const double share = 1.0 / static_cast<double>(ex.labels.size());
    for (ClassIndex c : ex.labels) {
      out.loss -= share * std::log(d(c));
      d(c) -= share;
    }
    d *= inv_batch;
    const Eigen::Map<const Vector> f(ex.features.data(), static_cast<Eigen::Index>(ex.features.size()));
    out.grads.weights.noalias() += f * d.transpose();
    out.grads.bias += d;
  }
  out.loss = out.loss * inv_batch + 0.5 * l2 * model.weights.squaredNorm();
  out.grads.weights += l2 * model.weights;
  return out;
}

std::vector<ImageExample> make_image_examples(const Corpus& corpus) {
  require_features(corpus);
  std::vector<ImageExample> out;
  out.reserve(corpus.size());
  for (const Document& doc : corpus.documents()) out.push_back({*doc.image_features, doc.labels});
  return out;
}

ScoreMatrix score_images(const LinearSoftmaxModel& model, const Corpus& corpus) {
  require_features(corpus);
  ScoreMatrix scores(static_cast<Eigen::Index>(corpus.size()), static_cast<Eigen::Index>(model.num_classes()));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    scores.row(static_cast<Eigen::Index>(i)) = predict_image(model, *corpus[i].image_features).transpose();
  }
  return scores;
}

TrainResult<LinearSoftmaxModel> train_image_head(const Corpus& train, const Corpus& validation,
                                                 const BalancedSampler& sampler, const TrainConfig& config) {
  if (train.image_dim() == 0) throw std::invalid_argument("training corpus has no image features");
  if (validation.image_dim() != train.image_dim()) throw std::invalid_argument("feature widths differ");
  if (sampler.weights().size() != train.size()) throw std::invalid_argument("sampler does not match the corpus");
  const auto examples = make_image_examples(train);
  require_features(validation);
  const RelevanceMatrix val_relevance = relevance_matrix(validation);
  std::vector<ImageExample> batch;
  auto step = [&](LinearSoftmaxModel& m, const std::vector<std::size_t>& indices, double lr) {
    batch.clear();
    for (std::size_t i : indices) batch.push_back(examples[i]);
    const LinearGradients g = image_gradients(m, batch, config.l2);
    const double norm = std::sqrt(g.grads.weights.squaredNorm() + g.grads.bias.squaredNorm());
    const double scale = norm > config.clip_norm ? lr * config.clip_norm / norm : lr;
    m.weights -= scale * g.grads.weights;
    m.bias -= scale * g.grads.bias;
    return g.loss;
  };
  auto validate = [&](const LinearSoftmaxModel& m) {
    return msap(EvalBatch{score_images(m, validation), val_relevance});
  };
  return run_training(LinearSoftmaxModel::zeros(train.image_dim(), train.num_classes()), sampler, config, step,
                      validate);
}

TrainResult<LinearSoftmaxModel> train_image_head(const Corpus& train, const Corpus& validation,
                                                 const TrainConfig& config) {
  return train_image_head(train, validation, BalancedSampler(train, config.seed), config);
}

namespace {
constexpr std::string_view kImageMagic = "EMJV1";
constexpr std::uint32_t kImageVersion = 1;
}  // namespace

void save_image_model(const LinearSoftmaxModel& model, std::ostream& out) {
  BinaryWriter w(out);
  w.magic(kImageMagic);
  w.u32(kImageVersion);
  w.u32(static_cast<std::uint32_t>(model.image_dim()));
  w.u32(static_cast<std::uint32_t>(model.num_classes()));
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c) w.f64(model.weights(r, c));
  }
  for (Eigen::Index c = 0; c < model.bias.size(); ++c) w.f64(model.bias(c));
}

void save_image_model(const LinearSoftmaxModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  save_image_model(model, out);
}

LinearSoftmaxModel load_image_model(std::istream& in, const std::string& source) {
  BinaryReader r(in, source);
  r.expect_magic(kImageMagic);
  if (const auto version = r.u32(); version != kImageVersion) {
    throw ModelError(source + ": unsupported image checkpoint version " + std::to_string(version));
  }
  const std::uint32_t d = r.u32();
  const std::uint32_t c = r.u32();
  LinearSoftmaxModel model = LinearSoftmaxModel::zeros(d, c);
  for (Eigen::Index i = 0; i < model.weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < model.weights.cols(); ++j) model.weights(i, j) = r.f64();
  }
  for (Eigen::Index j = 0; j < model.bias.size(); ++j) model.bias(j) = r.f64();
  if (!model.weights.allFinite() || !model.bias.allFinite()) throw ModelError(source + ": non-finite parameters");
  return model;
}

LinearSoftmaxModel load_image_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return load_image_model(in, path.string());
}

}  // namespace emojimodal
