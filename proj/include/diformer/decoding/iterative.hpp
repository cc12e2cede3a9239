#pragma once

#include <span>
#include <vector>

#include "diformer/decoding/autoregressive.hpp"

namespace diformer {

/// Non-autoregressive decoding state for one length candidate.
struct NARState {
  /// BOS, content, EOS; masked positions hold kMask.
  TokenSeq tokens;
  /// Per position; BOS and EOS are never masked.
  std::vector<bool> masked;
  /// Stored probability of the current token at each position.
  std::vector<double> confidences;
  int iteration = 0;
  /// Easy-first rank per position (0 = easiest); empty until iteration 1.
  std::vector<int> rank;
  int content_length = 0;
  double length_log_prob = 0.0;

  int size() const noexcept { return static_cast<int>(tokens.size()); }
};

/// One fully masked state per predicted content length, best length first.
std::vector<NARState> nar_init(const EncoderState<float>& enc, std::size_t index, int length_beam);

/// floor(n_content * (T - t) / T): positions re-masked after iteration t.
int remask_count(int n_content, int t, int T);

/// Interior positions to re-mask: the `count` lowest confidences, ties to
/// the leftmost position.
std::vector<int> lowest_confidence(const NARState& state, int count);

/// Rank of every position by descending confidence, ties to the leftmost.
/// BOS and EOS get rank -1.
std::vector<int> easy_first_ranks(std::span<const double> confidences);

/// Direction tags used for NAR inputs: R, S ... S, L.
DirectionSeq nar_directions(int n);

/// Key mask for a mask-predict pass: S rows hide the masked set and
/// themselves; the end rows see only their own side.
Mask mask_predict_mask(const std::vector<bool>& masked);

/// Key mask for an easy-first refinement pass: row i hides every interior j
/// with rank(j) >= rank(i).
Mask easy_first_mask(const std::vector<int>& rank);

/// Mask-predict with T iterations on every state jointly. Committed tokens
/// keep the confidence of the iteration that produced them. One trace per
/// state is filled when `traces` is given.
std::vector<Hypothesis> mask_predict(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                                     std::vector<NARState> states, int T, std::vector<Trace>* traces = nullptr);

/// Parallel easy-first with T iterations. Iteration 1 predicts every
/// position from BOS/EOS alone and fixes the ranks; later iterations
/// re-predict each position from the previous output of easier positions.
/// With early_stop, stops once an iteration changes no token.
std::vector<Hypothesis> easy_first(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                                   std::vector<NARState> states, int T, bool early_stop = false,
                                   std::vector<Trace>* traces = nullptr);

}  // namespace diformer
