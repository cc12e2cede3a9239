#pragma once

#include <span>
#include <string>
#include <vector>

#include "diformer/decoding/iterative.hpp"
#include "diformer/decoding/rerank.hpp"

namespace diformer {

enum class DecodeMode { L2R, R2L, MaskPredict, EasyFirst };

DecodeMode parse_decode_mode(const std::string& name);
std::string decode_mode_name(DecodeMode mode);

struct DecodeConfig {
  DecodeMode mode = DecodeMode::L2R;
  int ar_beam = 4;
  int length_beam = 5;
  /// Decoder pass budget for NAR modes. With self-reranking two of the
  /// passes go to scoring, so refinement runs iterations - 2 times.
  int iterations = 10;
  bool self_rerank = false;
  /// Longest output including BOS/EOS; 0 means the model's max_len.
  int max_len = 0;
  /// Easy-first only: stop once an iteration changes nothing.
  bool early_stop = false;

  bool autoregressive() const noexcept { return mode == DecodeMode::L2R || mode == DecodeMode::R2L; }
  int refinement_iterations() const;
  int scoring_passes() const;
  bool operator==(const DecodeConfig&) const = default;
};

struct Translation {
  Hypothesis best;
  std::vector<Hypothesis> candidates;
  Trace trace;
};

Translation translate(const Model<float>& model, const TokenSeq& src, const DecodeConfig& config,
                      bool with_trace = false);

/// Best output for each source, in input order.
std::vector<TokenSeq> translate_all(const Model<float>& model, std::span<const TokenSeq> sources,
                                    const DecodeConfig& config);

}  // namespace diformer
