#pragma once

#include <string>
#include <vector>

#include "diformer/corpus/batching.hpp"
#include "diformer/model/forward.hpp"
#include "diformer/numcore/rng.hpp"
#include "diformer/types.hpp"

namespace diformer {

/// How training direction sequences are drawn.
///
/// Mixed: first position R, last position L, every interior tag uniform over
/// {R, S, L}. FixedRight: every position R with the causal mask; the last
/// position has no right neighbour and carries no loss, which turns the
/// objective into ordinary left-to-right teacher forcing.
enum class DirectionMode { Mixed, FixedRight };

DirectionMode parse_direction_mode(const std::string& name);
std::string direction_mode_name(DirectionMode mode);

/// Throws Error if n < 2.
DirectionSeq sample_directions(int n, Rng& rng);
DirectionSeq fixed_right_directions(int n);

/// y*[i] = y[i+1] for R, y[i-1] for L, y[i] for S. An R tag at the last
/// position or an L tag at the first has no target and yields kIgnore.
TokenSeq build_shifted_targets(const TokenSeq& y, const DirectionSeq& z);

/// Key mask (true = hidden): R rows hide j > i, L rows hide j < i, S rows
/// hide one shared random subset M of interior positions plus themselves.
/// |M| is uniform over 1..N-2 and is drawn only when an S tag is present.
Mask build_attention_mask(const DirectionSeq& z, Rng& rng);

/// Masks for a fixed direction over the whole sequence: causal for R,
/// anticausal for L.
Mask causal_mask(Index n);
Mask anticausal_mask(Index n);

struct TrainBatch {
  std::vector<TokenSeq> sources;
  std::vector<DecoderExample> examples;
  /// Concatenated shifted targets, one per decoder row.
  TokenSeq targets;
  /// Length class per example: content length - 1.
  std::vector<TokenId> length_targets;

  std::size_t size() const noexcept { return examples.size(); }
  std::size_t target_tokens() const noexcept { return targets.size(); }
  /// Ids, directions and targets of every example, for error reports.
  std::string dump() const;
};

TrainBatch make_train_batch(const PaddedBatch& batch, Rng& rng, DirectionMode mode = DirectionMode::Mixed);
TrainBatch make_train_batch(std::span<const ParallelPair> pairs, Rng& rng,
                            DirectionMode mode = DirectionMode::Mixed);

template <typename Scalar>
struct LossParts {
  Var<Scalar> total;
  Var<Scalar> dlm;
  Var<Scalar> length;
};

/// total = L_DLM + lambda_len * L_LEN, both token/sentence means.
template <typename Scalar>
LossParts<Scalar> dlm_loss(const Model<Scalar>& model, const TrainBatch& batch, ForwardContext<Scalar>& ctx);

}  // namespace diformer
