#include "emojimodal/text_model.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <stdexcept>

#include "emojimodal/binary_io.hpp"
#include "emojimodal/error.hpp"
#include "emojimodal/metrics.hpp"

namespace emojimodal {
namespace {

Matrix sigmoid(const Matrix& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

// Per-step activations of one direction over a padded batch. Columns past
// a sequence's end keep computing on PAD but never reach the loss.
struct DirectionTrace {
  std::vector<std::vector<TokenId>> ids;  // [t][b]
  std::vector<Matrix> x, in, forget, cand, out, cell, tanh_cell, hidden;
  Matrix final_hidden;  // h x B, state after each sequence's last token
};

DirectionTrace run_direction(const LstmCell& cell, const Matrix& embedding,
                             std::span<const std::vector<TokenId>> seqs, bool reverse) {
  const Eigen::Index h = cell.recurrent_weights.cols();
  const Eigen::Index e = embedding.cols();
  const auto B = static_cast<Eigen::Index>(seqs.size());
  std::size_t T = 0;
  for (const auto& s : seqs) T = std::max(T, s.size());

  DirectionTrace tr;
  tr.final_hidden = Matrix::Zero(h, B);
  Matrix prev_h = Matrix::Zero(h, B);
  Matrix prev_c = Matrix::Zero(h, B);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<TokenId> ids(static_cast<std::size_t>(B));
    Matrix x(e, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& s = seqs[static_cast<std::size_t>(b)];
      TokenId id = Vocabulary::kPad;
      if (t < s.size()) id = reverse ? s[s.size() - 1 - t] : s[t];
      ids[static_cast<std::size_t>(b)] = id;
      x.col(b) = embedding.row(id).transpose();
    }
    Matrix z = cell.input_weights * x + cell.recurrent_weights * prev_h;
    z.colwise() += cell.bias;
    Matrix i_gate = sigmoid(z.topRows(h));
    Matrix f_gate = sigmoid(z.middleRows(h, h));
    Matrix g_gate = z.middleRows(2 * h, h).array().tanh().matrix();
    Matrix o_gate = sigmoid(z.bottomRows(h));
    Matrix c = f_gate.cwiseProduct(prev_c) + i_gate.cwiseProduct(g_gate);
    Matrix tc = c.array().tanh().matrix();
    Matrix hidden = o_gate.cwiseProduct(tc);
    for (Eigen::Index b = 0; b < B; ++b) {
      if (seqs[static_cast<std::size_t>(b)].size() == t + 1) tr.final_hidden.col(b) = hidden.col(b);
    }
    tr.ids.push_back(std::move(ids));
    tr.x.push_back(std::move(x));
    tr.in.push_back(std::move(i_gate));
    tr.forget.push_back(std::move(f_gate));
    tr.cand.push_back(std::move(g_gate));
    tr.out.push_back(std::move(o_gate));
    prev_c = c;
    prev_h = hidden;
    tr.cell.push_back(std::move(c));
    tr.tanh_cell.push_back(std::move(tc));
    tr.hidden.push_back(std::move(hidden));
  }
  return tr;
}

void backprop_direction(const LstmCell& cell, const DirectionTrace& tr, std::span<const std::vector<TokenId>> seqs,
                        const Matrix& d_final, LstmCell& grad, Matrix& d_embedding) {
  const Eigen::Index h = cell.recurrent_weights.cols();
  const Eigen::Index B = d_final.cols();
  const std::size_t T = tr.x.size();
  Matrix dh = Matrix::Zero(h, B);
  Matrix dc = Matrix::Zero(h, B);
  Matrix dz(4 * h, B);
  for (std::size_t t = T; t-- > 0;) {
    for (Eigen::Index b = 0; b < B; ++b) {
      if (seqs[static_cast<std::size_t>(b)].size() == t + 1) dh.col(b) += d_final.col(b);
    }
    const Matrix& i_gate = tr.in[t];
    const Matrix& f_gate = tr.forget[t];
    const Matrix& g_gate = tr.cand[t];
    const Matrix& o_gate = tr.out[t];
    const Matrix& tc = tr.tanh_cell[t];
    const Matrix prev_c = t > 0 ? tr.cell[t - 1] : Matrix::Zero(h, B);
    const Matrix prev_h = t > 0 ? tr.hidden[t - 1] : Matrix::Zero(h, B);

    const Matrix d_o = dh.cwiseProduct(tc);
    const Matrix dct = dc + dh.cwiseProduct(o_gate).cwiseProduct((1.0 - tc.array().square()).matrix());
    const Matrix d_f = dct.cwiseProduct(prev_c);
    const Matrix d_i = dct.cwiseProduct(g_gate);
    const Matrix d_g = dct.cwiseProduct(i_gate);
    dc = dct.cwiseProduct(f_gate);

    dz.topRows(h) = (d_i.array() * i_gate.array() * (1.0 - i_gate.array())).matrix();
    dz.middleRows(h, h) = (d_f.array() * f_gate.array() * (1.0 - f_gate.array())).matrix();
    dz.middleRows(2 * h, h) = (d_g.array() * (1.0 - g_gate.array().square())).matrix();
    dz.bottomRows(h) = (d_o.array() * o_gate.array() * (1.0 - o_gate.array())).matrix();

    grad.input_weights.noalias() += dz * tr.x[t].transpose();
    grad.recurrent_weights.noalias() += dz * prev_h.transpose();
    grad.bias.noalias() += dz.rowwise().sum();
    const Matrix dx = cell.input_weights.transpose() * dz;
    for (Eigen::Index b = 0; b < B; ++b) {
      if (t < seqs[static_cast<std::size_t>(b)].size()) {
        d_embedding.row(tr.ids[t][static_cast<std::size_t>(b)]) += dx.col(b).transpose();
      }
    }
    dh = cell.recurrent_weights.transpose() * dz;
  }
}

void check_tokens(const BiLstmParams& params, std::span<const std::vector<TokenId>> seqs) {
  for (const auto& s : seqs) {
    if (s.empty()) throw std::invalid_argument("token sequence is empty");
    for (TokenId id : s) {
      if (id >= params.vocab_size()) throw std::out_of_range("token id " + std::to_string(id) + " out of range");
    }
  }
}

struct ForwardTrace {
  DirectionTrace fwd, bwd;
  Matrix features;  // 2h x B
  Matrix probs;     // C x B
};

ForwardTrace run_forward(const BiLstmParams& params, std::span<const std::vector<TokenId>> seqs) {
  check_tokens(params, seqs);
  ForwardTrace tr;
  tr.fwd = run_direction(params.forward_cell, params.embedding, seqs, false);
  tr.bwd = run_direction(params.backward_cell, params.embedding, seqs, true);
  const Eigen::Index h = static_cast<Eigen::Index>(params.hidden_dim());
  tr.features.resize(2 * h, static_cast<Eigen::Index>(seqs.size()));
  tr.features.topRows(h) = tr.fwd.final_hidden;
  tr.features.bottomRows(h) = tr.bwd.final_hidden;
  Matrix logits = params.output_weights.transpose() * tr.features;
  logits.colwise() += params.output_bias;
  tr.probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.cols(); ++b) tr.probs.col(b) = softmax(logits.col(b));
  return tr;
}

std::vector<std::vector<TokenId>> sequences_of(std::span<const TextExample> batch) {
  std::vector<std::vector<TokenId>> seqs;
  seqs.reserve(batch.size());
  for (const auto& ex : batch) seqs.push_back(ex.tokens.empty() ? std::vector<TokenId>{Vocabulary::kPad} : ex.tokens);
  return seqs;
}

Matrix targets_of(std::span<const TextExample> batch, std::size_t classes) {
  Matrix target = Matrix::Zero(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& labels = batch[b].labels;
    if (labels.empty()) throw std::invalid_argument("training example without labels");
    for (ClassIndex c : labels) {
      if (c >= classes) throw std::out_of_range("label outside the output layer");
      target(c, static_cast<Eigen::Index>(b)) = 1.0 / static_cast<double>(labels.size());
    }
  }
  return target;
}

double cross_entropy(const Matrix& probs, const Matrix& target) {
  double total = 0.0;
  for (Eigen::Index b = 0; b < probs.cols(); ++b) {
    for (Eigen::Index c = 0; c < probs.rows(); ++c) {
      if (target(c, b) > 0.0) total -= target(c, b) * std::log(probs(c, b));
    }
  }
  return total / static_cast<double>(probs.cols());
}

}  // namespace

BiLstmParams BiLstmParams::zeros(std::size_t vocab, std::size_t embed_dim, std::size_t hidden, std::size_t classes) {
  const auto V = static_cast<Eigen::Index>(vocab);
  const auto E = static_cast<Eigen::Index>(embed_dim);
  const auto H = static_cast<Eigen::Index>(hidden);
  const auto C = static_cast<Eigen::Index>(classes);
  BiLstmParams p;
  p.embedding = Matrix::Zero(V, E);
  for (LstmCell* cell : {&p.forward_cell, &p.backward_cell}) {
    cell->input_weights = Matrix::Zero(4 * H, E);
    cell->recurrent_weights = Matrix::Zero(4 * H, H);
    cell->bias = Vector::Zero(4 * H);
  }
  p.output_weights = Matrix::Zero(2 * H, C);
  p.output_bias = Vector::Zero(C);
  return p;
}

bool BiLstmParams::all_finite() const {
  bool ok = true;
  for_each_block([&](const auto& block) { ok = ok && block.allFinite(); });
  return ok;
}

BiLstmParams init_params(std::size_t vocab, std::size_t embed_dim, std::size_t hidden, std::size_t classes,
                         double scale, std::uint64_t seed) {
  BiLstmParams p = BiLstmParams::zeros(vocab, embed_dim, hidden, classes);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-scale, scale);
  p.for_each_block([&](auto& block) {
    for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = uniform(rng);
  });
  const auto H = static_cast<Eigen::Index>(hidden);
  for (LstmCell* cell : {&p.forward_cell, &p.backward_cell}) {
    cell->bias.setZero();
    cell->bias.segment(H, H).setOnes();
  }
  p.output_bias.setZero();
  return p;
}

ScoreVector forward(const BiLstmParams& params, std::span<const TokenId> tokens) {
  std::vector<std::vector<TokenId>> seqs{tokens.empty() ? std::vector<TokenId>{Vocabulary::kPad}
                                                        : std::vector<TokenId>(tokens.begin(), tokens.end())};
  return run_forward(params, seqs).probs.col(0);
}

Matrix forward_batch(const BiLstmParams& params, std::span<const std::vector<TokenId>> sequences) {
  std::vector<std::vector<TokenId>> seqs;
  seqs.reserve(sequences.size());
  for (const auto& s : sequences) seqs.push_back(s.empty() ? std::vector<TokenId>{Vocabulary::kPad} : s);
  return run_forward(params, seqs).probs;
}

double loss(const BiLstmParams& params, std::span<const TextExample> batch) {
  if (batch.empty()) throw std::invalid_argument("loss of an empty batch");
  const auto seqs = sequences_of(batch);
  const ForwardTrace tr = run_forward(params, seqs);
  return cross_entropy(tr.probs, targets_of(batch, params.num_classes()));
}

double BiLstmGradients::squared_norm() const {
  double total = 0.0;
  for (TokenId row : touched_rows) total += grads.embedding.row(row).squaredNorm();
  for (const LstmCell* cell : {&grads.forward_cell, &grads.backward_cell}) {
    total += cell->input_weights.squaredNorm() + cell->recurrent_weights.squaredNorm() + cell->bias.squaredNorm();
  }
  return total + grads.output_weights.squaredNorm() + grads.output_bias.squaredNorm();
}

BiLstmGradients backward(const BiLstmParams& params, std::span<const TextExample> batch) {
  if (batch.empty()) throw std::invalid_argument("gradient of an empty batch");
  const auto seqs = sequences_of(batch);
  const ForwardTrace tr = run_forward(params, seqs);
  const Matrix target = targets_of(batch, params.num_classes());

  BiLstmGradients out;
  out.loss = cross_entropy(tr.probs, target);
  out.grads = BiLstmParams::zeros(params.vocab_size(), params.embed_dim(), params.hidden_dim(), params.num_classes());
  const Matrix d_logits = (tr.probs - target) / static_cast<double>(batch.size());
  out.grads.output_weights.noalias() = tr.features * d_logits.transpose();
  out.grads.output_bias = d_logits.rowwise().sum();
  const Matrix d_features = params.output_weights * d_logits;
  const Eigen::Index h = static_cast<Eigen::Index>(params.hidden_dim());
  backprop_direction(params.forward_cell, tr.fwd, seqs, d_features.topRows(h), out.grads.forward_cell,
                     out.grads.embedding);
  backprop_direction(params.backward_cell, tr.bwd, seqs, d_features.bottomRows(h), out.grads.backward_cell,
                     out.grads.embedding);

  for (const auto& s : seqs) out.touched_rows.insert(out.touched_rows.end(), s.begin(), s.end());
  std::sort(out.touched_rows.begin(), out.touched_rows.end());
  out.touched_rows.erase(std::unique(out.touched_rows.begin(), out.touched_rows.end()), out.touched_rows.end());
  return out;
}

void sgd_update(BiLstmParams& params, const BiLstmGradients& g, double lr, double clip_norm) {
  const double norm = std::sqrt(g.squared_norm());
  const double scale = (clip_norm > 0.0 && norm > clip_norm) ? lr * clip_norm / norm : lr;
  for (TokenId row : g.touched_rows) params.embedding.row(row) -= scale * g.grads.embedding.row(row);
  for (auto [p, d] : {std::pair{&params.forward_cell, &g.grads.forward_cell},
                      std::pair{&params.backward_cell, &g.grads.backward_cell}}) {
    p->input_weights -= scale * d->input_weights;
    p->recurrent_weights -= scale * d->recurrent_weights;
    p->bias -= scale * d->bias;
  }
  params.output_weights -= scale * g.grads.output_weights;
  params.output_bias -= scale * g.grads.output_bias;
}

std::vector<TextExample> make_text_examples(const TextModel& model, const Corpus& corpus) {
  std::vector<TextExample> out;
  out.reserve(corpus.size());
  for (const Document& doc : corpus.documents()) out.push_back({model.encode(doc.stripped_text), doc.labels});
  return out;
}

ScoreMatrix score_texts(const TextModel& model, const Corpus& corpus) {
  constexpr std::size_t kChunk = 64;
  ScoreMatrix scores(static_cast<Eigen::Index>(corpus.size()), static_cast<Eigen::Index>(model.params.num_classes()));
  std::vector<std::vector<TokenId>> chunk;
  for (std::size_t start = 0; start < corpus.size(); start += kChunk) {
    const std::size_t end = std::min(corpus.size(), start + kChunk);
    chunk.clear();
    for (std::size_t i = start; i < end; ++i) chunk.push_back(model.encode(corpus[i].stripped_text));
    const Matrix probs = forward_batch(model.params, chunk);
    for (std::size_t i = start; i < end; ++i) {
      scores.row(static_cast<Eigen::Index>(i)) = probs.col(static_cast<Eigen::Index>(i - start)).transpose();
    }
  }
  return scores;
}

TrainResult<TextModel> train_text_model(TextModel model, const Corpus& train, const Corpus& validation,
                                        const BalancedSampler& sampler, const TrainConfig& config) {
  if (train.num_classes() != model.params.num_classes() || validation.num_classes() != model.params.num_classes()) {
    throw std::invalid_argument("corpus catalog does not match the model output layer");
  }
  if (sampler.weights().size() != train.size()) throw std::invalid_argument("sampler does not match the corpus");
  const auto examples = make_text_examples(model, train);
  const RelevanceMatrix val_relevance = relevance_matrix(validation);
  std::vector<TextExample> batch;
  auto step = [&](TextModel& m, const std::vector<std::size_t>& indices, double lr) {
    batch.clear();
    for (std::size_t i : indices) batch.push_back(examples[i]);
    const BiLstmGradients g = backward(m.params, batch);
    sgd_update(m.params, g, lr, config.clip_norm);
    return g.loss;
  };
  auto validate = [&](const TextModel& m) {
    return msap(EvalBatch{score_texts(m, validation), val_relevance});
  };
  return run_training(std::move(model), sampler, config, step, validate);
}

TrainResult<TextModel> train_text_model(const Corpus& train, const Corpus& validation,
                                        const TextModelConfig& model_config, const TrainConfig& config) {
  config.validate();
  TextModel model;
  model.vocab = build_vocab(train, model_config.min_count);
  model.max_tokens = model_config.max_tokens;
  model.params = init_params(model.vocab.size(), model_config.embed_dim, model_config.hidden_dim,
                             train.num_classes(), model_config.init_scale, config.seed);
  const BalancedSampler sampler(train, config.seed);
  return train_text_model(std::move(model), train, validation, sampler, config);
}

namespace {
constexpr std::string_view kTextMagic = "EMJT1";
constexpr std::uint32_t kTextVersion = 1;

template <typename Block>
void write_block(BinaryWriter& w, const Block& block) {
  for (Eigen::Index r = 0; r < block.rows(); ++r) {
    for (Eigen::Index c = 0; c < block.cols(); ++c) w.f64(block(r, c));
  }
}

template <typename Block>
void read_block(BinaryReader& r, Block& block) {
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    for (Eigen::Index j = 0; j < block.cols(); ++j) block(i, j) = r.f64();
  }
}
}  // namespace

void save_text_model(const TextModel& model, std::ostream& out) {
  BinaryWriter w(out);
  w.magic(kTextMagic);
  w.u32(kTextVersion);
  w.u32(static_cast<std::uint32_t>(model.max_tokens));
  w.u32(static_cast<std::uint32_t>(model.vocab.size()));
  for (const auto& token : model.vocab.tokens()) w.str(token);
  const BiLstmParams& p = model.params;
  w.u32(static_cast<std::uint32_t>(p.embed_dim()));
  w.u32(static_cast<std::uint32_t>(p.hidden_dim()));
  w.u32(static_cast<std::uint32_t>(p.num_classes()));
  p.for_each_block([&](const auto& block) { write_block(w, block); });
}

void save_text_model(const TextModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  save_text_model(model, out);
}

TextModel load_text_model(std::istream& in, const std::string& source) {
  BinaryReader r(in, source);
  r.expect_magic(kTextMagic);
  if (const auto version = r.u32(); version != kTextVersion) {
    throw ModelError(source + ": unsupported text checkpoint version " + std::to_string(version));
  }
  TextModel model;
  model.max_tokens = r.u32();
  const std::uint32_t vocab_size = r.u32();
  if (vocab_size < 4) throw ModelError(source + ": vocabulary lacks special tokens");
  std::vector<std::string> tokens;
  for (std::uint32_t i = 0; i < vocab_size; ++i) {
    std::string t = r.str();
    if (i >= 4) tokens.push_back(std::move(t));
  }
  model.vocab = Vocabulary(tokens);
  const std::uint32_t e = r.u32();
  const std::uint32_t h = r.u32();
  const std::uint32_t c = r.u32();
  model.params = BiLstmParams::zeros(vocab_size, e, h, c);
  model.params.for_each_block([&](auto& block) { read_block(r, block); });
  if (!model.params.all_finite()) throw ModelError(source + ": non-finite parameters");
  return model;
}

TextModel load_text_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return load_text_model(in, path.string());
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !(lr_decay > 0.0) || batch_size < 1 || max_epochs < 1 || patience < 1 ||
      !(clip_norm > 0.0) || l2 < 0.0) {
    throw std::invalid_argument("training configuration fields must be positive (patience >= 1)");
  }
}

}  // namespace emojimodal
