#include "diformer/decoding/rerank.hpp"

#include "diformer/error.hpp"

namespace diformer {

void score_both_directions(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                           std::vector<Hypothesis>& candidates) {
  std::vector<TokenSeq> seqs;
  for (const auto& c : candidates) seqs.push_back(c.tokens);
  const auto right = score_sequences(model, enc, index, seqs, Direction::R);
  const auto left = score_sequences(model, enc, index, seqs, Direction::L);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].score_l2r = right[i];
    candidates[i].score_r2l = left[i];
    candidates[i].score = 0.5 * (right[i] + left[i]);
  }
}

std::size_t best_by_score(const std::vector<Hypothesis>& candidates) {
  if (candidates.empty()) throw Error("no candidates to choose from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].score > candidates[best].score) best = i;
  }
  return best;
}

std::size_t self_rerank(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                        std::vector<Hypothesis>& candidates) {
  if (candidates.empty()) throw Error("self_rerank: no candidates");
  if (candidates.size() == 1) return 0;
  score_both_directions(model, enc, index, candidates);
  return best_by_score(candidates);
}

}  // namespace diformer
