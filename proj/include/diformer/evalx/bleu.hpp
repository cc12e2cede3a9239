#pragma once

#include <span>
#include <string>
#include <vector>

#include "diformer/types.hpp"

namespace diformer {

struct BleuReport {
  double bleu = 0.0;
  double precisions[4] = {0, 0, 0, 0};
  double brevity_penalty = 0.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  /// `BLEU=.. p1=.. p2=.. p3=.. p4=.. BP=.. hyp_len=.. ref_len=..`
  std::string to_string() const;
};

using Sentence = std::vector<std::string>;

/// Corpus BLEU-4 over whitespace tokens: clipped n-gram matches and totals
/// are pooled over the corpus, BP = exp(1 - r/h) when h < r. An order with
/// no match at all is smoothed by adding one to its matches and its total.
BleuReport corpus_bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs);

/// Same, over id sequences with BOS, EOS and PAD removed.
BleuReport corpus_bleu(std::span<const TokenSeq> hyps, std::span<const TokenSeq> refs);

/// Fraction of pairs that are identical once BOS, EOS and PAD are removed.
double exact_match(std::span<const TokenSeq> hyps, std::span<const TokenSeq> refs);

/// Content tokens of an id sequence (BOS, EOS and PAD removed).
TokenSeq strip_frame(std::span<const TokenId> ids);

}  // namespace diformer
