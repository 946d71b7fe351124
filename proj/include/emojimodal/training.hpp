#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "emojimodal/corpus.hpp"
#include "emojimodal/error.hpp"

namespace emojimodal {

struct TrainConfig {
  double learning_rate = 0.1;
  // Multiplier applied to the learning rate after an epoch without
  // validation improvement.
  double lr_decay = 0.5;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  double clip_norm = 5.0;
  double l2 = 0.0;
  std::uint64_t seed = 1;
  // Draws per epoch; 0 means one pass worth (N draws).
  std::size_t epoch_draws = 0;

  // Throws std::invalid_argument on a non-positive field.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch;
  double train_loss;
  double validation_msap;
  double learning_rate;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_validation_msap = -1.0;
  bool stopped_early = false;
};

template <typename Model>
struct TrainResult {
  Model model;
  TrainHistory history;
};

// Minibatch SGD over balanced draws with early stopping on validation msAP.
// `step(model, indices, lr)` applies one update and returns the batch loss;
// `validate(model)` returns validation msAP. Returns the best snapshot.
template <typename Model, typename StepFn, typename ValidateFn>
TrainResult<Model> run_training(Model model, const BalancedSampler& sampler, const TrainConfig& config,
                                StepFn&& step, ValidateFn&& validate) {
  config.validate();
  const std::size_t n = sampler.weights().size();
  const std::size_t draws = config.epoch_draws > 0 ? config.epoch_draws : n;
  const std::size_t steps = (draws + config.batch_size - 1) / config.batch_size;

  TrainResult<Model> best{model, {}};
  TrainHistory& history = best.history;
  RngState rng = sampler.initial_state();
  double lr = config.learning_rate;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      BatchDraw batch = next_batch(sampler, config.batch_size, std::move(rng));
      rng = std::move(batch.state);
      const double loss = step(model, batch.indices, lr);
      if (!std::isfinite(loss)) {
        throw ModelError("training diverged at epoch " + std::to_string(epoch) + " step " + std::to_string(s + 1) +
                         " (non-finite loss)");
      }
      loss_sum += loss;
    }
    const double val = validate(model);
    history.epochs.push_back({epoch, loss_sum / static_cast<double>(steps), val, lr});
    spdlog::info("epoch {} loss {:.6f} validation msAP {:.6f} lr {:.4g}", epoch,
                 loss_sum / static_cast<double>(steps), val, lr);
    if (val > history.best_validation_msap) {
      history.best_validation_msap = val;
      history.best_epoch = epoch;
      best.model = model;
      since_best = 0;
    } else {
      lr *= config.lr_decay;
      if (++since_best >= config.patience) {
        history.stopped_early = true;
        break;
      }
    }
  }
  return best;
}

}  // namespace emojimodal
