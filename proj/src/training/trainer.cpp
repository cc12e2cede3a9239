#include "diformer/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

#include "diformer/error.hpp"

namespace diformer {

double LRSchedule::operator()(std::int64_t step) const {
  if (step < 1) throw Error("lr schedule: step must be at least 1");
  if (warmup <= 0) return peak;
  const double s = double(step);
  const double w = double(warmup);
  return s <= w ? peak * s / w : peak * std::sqrt(w / s);
}

StepResult dlm_train_step(Model<float>& model, AdamState<float>& opt, const TrainBatch& batch, double lr,
                          Rng* dropout_rng) {
  Tape<float> tape;
  ForwardContext<float> ctx{tape, dropout_rng, dropout_rng ? model.config().dropout : 0.0};
  const auto loss = dlm_loss(model, batch, ctx);
  StepResult r;
  r.loss_dlm = loss.dlm->item();
  r.loss_len = loss.length->item();
  r.loss = loss.total->item();
  r.tokens = batch.target_tokens();
  if (!std::isfinite(r.loss)) {
    throw NonFiniteError("training loss is not finite (dlm " + std::to_string(r.loss_dlm) + ", length " +
                         std::to_string(r.loss_len) + ") on batch:\n" + batch.dump());
  }
  tape.backward(loss.total);
  adam_step(model.params(), opt, lr);
  return r;
}

TrainSummary train(Model<float>& model, std::span<const ParallelPair> pairs, const TrainOptions& options) {
  if (pairs.empty()) throw DataError("train: no training pairs");
  const Rng root(options.seed);
  Rng direction_rng = root.stream("directions");
  Rng dropout_rng = root.stream("dropout");
  AdamState<float> opt;
  TrainSummary summary;
  summary.best_loss = std::numeric_limits<double>::infinity();
  std::optional<Model<float>> best;

  double epoch_loss = 0.0;
  std::int64_t epoch_steps = 0;
  auto close_epoch = [&](std::int64_t step) {
    if (epoch_steps == 0) return;
    const double mean = epoch_loss / double(epoch_steps);
    if (mean < summary.best_loss) {
      summary.best_loss = mean;
      summary.best_step = step;
      best = model.clone();
    }
    epoch_loss = 0.0;
    epoch_steps = 0;
  };

  std::int64_t step = 0;
  for (std::uint64_t epoch = 0; step < options.steps; ++epoch) {
    const auto batches = make_batches(pairs, options.max_tokens, options.seed + epoch);
    for (const auto& padded : batches) {
      if (step >= options.steps) break;
      ++step;
      const auto batch = make_train_batch(padded, direction_rng, options.direction_mode);
      const double lr = options.schedule(step);
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = dlm_train_step(model, opt, batch, lr, &dropout_rng);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (step == 1) summary.first_loss_dlm = r.loss_dlm;
      summary.last_loss_dlm = r.loss_dlm;
      epoch_loss += r.loss;
      ++epoch_steps;
      if (options.log) {
        *options.log << step << '\t' << lr << '\t' << r.loss_dlm << '\t' << r.loss_len << '\t'
                     << (secs > 0 ? double(r.tokens) / secs : 0.0) << '\n';
      }
      if (options.on_step) options.on_step(step, r);
    }
    close_epoch(step);
  }
  summary.steps = step;
  if (best) model = std::move(*best);
  return summary;
}

}  // namespace diformer
