#pragma once

#include <span>
#include <string>
#include <vector>

#include "diformer/corpus/vocabulary.hpp"
#include "diformer/types.hpp"

namespace diformer {

/// One decoding step: what was produced, what the decoder was fed, and the
/// direction tag of every fed position that makes a prediction. Masked
/// positions hold kMask.
struct TraceStep {
  int step = 0;
  TokenSeq output;
  TokenSeq context;
  DirectionSeq directions;
  bool operator==(const TraceStep&) const = default;
};

struct Trace {
  std::vector<TraceStep> steps;
  /// Free-form metadata (candidate lengths, scores, budgets).
  std::vector<std::string> notes;
};

/// Space-joined tokens with BOS as [B], EOS as [E] and MASK as -.
std::string format_tokens(std::span<const TokenId> ids, const Vocabulary& vocab);
std::string format_directions(const DirectionSeq& z);

/// Notes first as `# ...` lines, then one `step<TAB>output<TAB>context<TAB>directions` line per step.
std::string format_trace(const Trace& trace, const Vocabulary& vocab);

}  // namespace diformer
