#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>

#include "diformer/corpus/tasks.hpp"
#include "diformer/model/model.hpp"
#include "diformer/numcore/adam.hpp"
#include "diformer/training/objective.hpp"

namespace diformer {

/// Linear warmup to `peak` at step `warmup`, then inverse square-root decay.
struct LRSchedule {
  double peak = 5e-4;
  int warmup = 400;

  /// step >= 1.
  double operator()(std::int64_t step) const;
};

struct StepResult {
  double loss_dlm = 0.0;
  double loss_len = 0.0;
  double loss = 0.0;
  std::size_t tokens = 0;
};

/// Forward, backward and one Adam update with learning rate `lr`. Throws
/// NonFiniteError (message includes the batch) if the loss is not finite.
StepResult dlm_train_step(Model<float>& model, AdamState<float>& opt, const TrainBatch& batch, double lr,
                          Rng* dropout_rng);

struct TrainOptions {
  LRSchedule schedule;
  std::int64_t steps = 4000;
  int max_tokens = 4096;
  std::uint64_t seed = 1;
  DirectionMode direction_mode = DirectionMode::Mixed;
  /// Metrics sink: one line per step, `step\tlr\tloss_dlm\tloss_len\ttokens/s`.
  std::ostream* log = nullptr;
  /// Called after every step with the step number and its result.
  std::function<void(std::int64_t, const StepResult&)> on_step;
};

struct TrainSummary {
  std::int64_t steps = 0;
  double first_loss_dlm = 0.0;
  double last_loss_dlm = 0.0;
  /// Lowest epoch-mean total loss, and the step after which it was reached.
  double best_loss = 0.0;
  std::int64_t best_step = 0;
};

/// Trains for options.steps updates, reshuffling the data every epoch, and
/// leaves `model` at the snapshot with the lowest epoch-mean training loss
/// (a partial final epoch counts as an epoch).
TrainSummary train(Model<float>& model, std::span<const ParallelPair> pairs, const TrainOptions& options);

}  // namespace diformer
