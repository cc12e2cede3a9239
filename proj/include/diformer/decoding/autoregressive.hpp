#pragma once

#include <optional>
#include <span>
#include <vector>

#include "diformer/decoding/trace.hpp"
#include "diformer/model/forward.hpp"

namespace diformer {

struct Hypothesis {
  /// BOS ... EOS in natural left-to-right order.
  TokenSeq tokens;
  /// Probability of each token when it was produced; 1 for given tokens.
  std::vector<double> confidences;
  /// Mean token log-probabilities under each direction, when computed.
  std::optional<double> score_l2r;
  std::optional<double> score_r2l;
  /// Selection key: beam score for AR, mean stored confidence for NAR,
  /// averaged two-direction score after self-reranking.
  double score = 0.0;
  /// Beam rank (AR) or predicted content length (NAR).
  int origin = 0;
  bool finished = true;
};

/// Decoder logits for a batch of sequences, without recording gradients.
Matrix<float> decoder_logits(const Model<float>& model, const EncoderState<float>& enc,
                             std::vector<DecoderExample> examples);

/// Encoder state for one source, no gradients.
EncoderState<float> encode_source(const Model<float>& model, const TokenSeq& src);

/// Length-normalized beam search in a fixed direction (R or L).
///
/// R grows [BOS] rightwards until EOS. L grows [EOS] leftwards until BOS,
/// every position tagged L with the anticausal mask, so positions count from
/// the right end. Only regular tokens and the terminal are proposed, and
/// the terminal only once at least one content token exists.
/// Hypotheses come back in natural order, best first; if none terminates
/// within max_len tokens the best unfinished one is returned with
/// finished = false.
std::vector<Hypothesis> beam_ar(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                                Direction direction, int beam, int max_len = 0);

/// Mean log-probability of each full sequence (BOS ... EOS) under one
/// direction, over its N - 1 predicted tokens, in one batched pass.
std::vector<double> score_sequences(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                                    std::span<const TokenSeq> sequences, Direction direction);
double score_sequence(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                      const TokenSeq& sequence, Direction direction);

/// Step-by-step view of an AR hypothesis: step s shows the first s produced
/// tokens and the s tokens the decoder read to produce them.
Trace ar_trace(const Hypothesis& hyp, Direction direction);

}  // namespace diformer
