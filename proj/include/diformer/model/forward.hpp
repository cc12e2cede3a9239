#pragma once

#include <span>
#include <vector>

#include "diformer/corpus/batching.hpp"
#include "diformer/model/model.hpp"
#include "diformer/numcore/rng.hpp"
#include "diformer/numcore/tensor.hpp"
#include "diformer/types.hpp"

namespace diformer {

template <typename Scalar>
struct ForwardContext {
  Tape<Scalar>& tape;
  /// Dropout source; dropout is disabled when null.
  Rng* rng = nullptr;
  double dropout = 0.0;
};

/// Encoder outputs for a packed batch of sources (no padding rows).
template <typename Scalar>
struct EncoderState {
  /// [sum of source lengths, d_model]; sequence b occupies rows
  /// offsets[b] .. offsets[b] + lengths[b].
  Var<Scalar> hidden;
  std::vector<Index> offsets;
  std::vector<Index> lengths;
  /// [batch, max_len]; column c scores content length c + 1.
  Var<Scalar> length_logits;

  std::size_t size() const noexcept { return offsets.size(); }
};

template <typename Scalar>
EncoderState<Scalar> encode(const Model<Scalar>& model, std::span<const TokenSeq> sources, ForwardContext<Scalar>& ctx);

/// Encodes the unpadded rows of a padded batch; PAD content is never read.
template <typename Scalar>
EncoderState<Scalar> encode(const Model<Scalar>& model, const PaddedBatch& batch, ForwardContext<Scalar>& ctx);

/// Which positional bank a decoder position reads and the 1-based index in it.
struct DirectedPosition {
  bool from_right = false;
  int index = 1;
  bool operator==(const DirectedPosition&) const = default;
};

/// R and S count from the left (index i); L counts from the right
/// (index N - i + 1). Throws DimensionError unless 1 <= i <= N.
DirectedPosition directed_position_index(int i, int n, Direction z);

/// One decoder sequence with its directions and key mask (true = hidden).
struct DecoderExample {
  TokenSeq tokens;
  DirectionSeq directions;
  Mask key_mask;
  /// Row of the encoder state this sequence attends to.
  int encoder_index = 0;
};

/// Directional decoder. Returns logits [sum of lengths, vocab_size].
///
/// The query stream starts from position + direction embeddings only. In
/// every self-attention layer keys and values are projections of the word
/// embeddings (never of hidden states) plus relative-position terms, with the
/// per-query key mask applied as -inf. Cross-attention is standard.
template <typename Scalar>
Var<Scalar> decoder_forward(const Model<Scalar>& model, const EncoderState<Scalar>& enc,
                            std::span<const DecoderExample> examples, ForwardContext<Scalar>& ctx);

struct LengthCandidate {
  int length = 0;  ///< content length, BOS/EOS excluded
  double log_prob = 0.0;
  bool operator==(const LengthCandidate&) const = default;
};

/// The `beam` most probable content lengths for encoder row `index`, by
/// descending log-probability, ties to the shorter length.
template <typename Scalar>
std::vector<LengthCandidate> predict_length(const EncoderState<Scalar>& enc, std::size_t index, int beam);

}  // namespace diformer
