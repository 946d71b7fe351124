#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "emojimodal/corpus.hpp"
#include "emojimodal/linalg.hpp"
#include "emojimodal/tokenizer.hpp"
#include "emojimodal/training.hpp"

namespace emojimodal {

// Gated memory cell. Gate rows are stacked input, forget, candidate, output.
struct LstmCell {
  Matrix input_weights;      // 4h x d_emb
  Matrix recurrent_weights;  // 4h x h
  Vector bias;               // 4h
};

struct BiLstmParams {
  Matrix embedding;  // |V| x d_emb
  LstmCell forward_cell;
  LstmCell backward_cell;
  Matrix output_weights;  // 2h x C; rows [0,h) read the forward state
  Vector output_bias;     // C

  static BiLstmParams zeros(std::size_t vocab, std::size_t embed_dim, std::size_t hidden, std::size_t classes);

  std::size_t vocab_size() const { return static_cast<std::size_t>(embedding.rows()); }
  std::size_t embed_dim() const { return static_cast<std::size_t>(embedding.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(forward_cell.recurrent_weights.cols()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(output_bias.size()); }

  bool all_finite() const;
  // Visits every parameter block in checkpoint order.
  template <typename Fn>
  void for_each_block(Fn&& fn) { visit_blocks(*this, fn); }
  template <typename Fn>
  void for_each_block(Fn&& fn) const { visit_blocks(*this, fn); }

 private:
  template <typename Self, typename Fn>
  static void visit_blocks(Self& self, Fn& fn) {
    fn(self.embedding);
    for (auto* cell : {&self.forward_cell, &self.backward_cell}) {
      fn(cell->input_weights);
      fn(cell->recurrent_weights);
      fn(cell->bias);
    }
    fn(self.output_weights);
    fn(self.output_bias);
  }
};

struct TextExample {
  std::vector<TokenId> tokens;
  std::vector<ClassIndex> labels;  // annotation set; target is uniform over it
};

struct TextModelConfig {
  std::size_t embed_dim = 64;
  std::size_t hidden_dim = 128;
  std::size_t min_count = 5;
  std::size_t max_tokens = 64;
  double init_scale = 0.1;
};

// Vocabulary plus bi-directional recurrent classifier.
struct TextModel {
  Vocabulary vocab;
  BiLstmParams params;
  std::size_t max_tokens = 64;

  std::vector<TokenId> encode(std::string_view text) const { return vocab.encode(text, max_tokens); }
};

// Uniform(-scale, scale) weights, forget-gate bias 1.
BiLstmParams init_params(std::size_t vocab, std::size_t embed_dim, std::size_t hidden, std::size_t classes,
                         double scale, std::uint64_t seed);

// Softmax over classes from the concatenated final forward/backward states.
// Empty input is treated as a single PAD token. Throws std::out_of_range on
// a token id outside the vocabulary.
ScoreVector forward(const BiLstmParams& params, std::span<const TokenId> tokens);
// Column i holds the distribution for sequences[i].
Matrix forward_batch(const BiLstmParams& params, std::span<const std::vector<TokenId>> sequences);

// Mean over the batch of -sum_j (y_j / |y|) log p_j.
double loss(const BiLstmParams& params, std::span<const TextExample> batch);

struct BiLstmGradients {
  double loss = 0.0;
  BiLstmParams grads;
  std::vector<TokenId> touched_rows;  // sorted embedding rows with non-zero support

  double squared_norm() const;
};

// Exact gradients by backpropagation through time.
BiLstmGradients backward(const BiLstmParams& params, std::span<const TextExample> batch);

// params -= lr * grads, with grads rescaled to clip_norm when larger.
void sgd_update(BiLstmParams& params, const BiLstmGradients& grads, double lr, double clip_norm);

std::vector<TextExample> make_text_examples(const TextModel& model, const Corpus& corpus);
ScoreMatrix score_texts(const TextModel& model, const Corpus& corpus);

TrainResult<TextModel> train_text_model(const Corpus& train, const Corpus& validation,
                                        const TextModelConfig& model_config, const TrainConfig& config);
// Trains from an existing model and vocabulary.
TrainResult<TextModel> train_text_model(TextModel model, const Corpus& train, const Corpus& validation,
                                        const BalancedSampler& sampler, const TrainConfig& config);

// Checkpoint, magic "EMJT1": version, vocab, shapes, row-major blocks.
void save_text_model(const TextModel& model, std::ostream& out);
void save_text_model(const TextModel& model, const std::filesystem::path& path);
TextModel load_text_model(std::istream& in, const std::string& source);
TextModel load_text_model(const std::filesystem::path& path);

}  // namespace emojimodal
