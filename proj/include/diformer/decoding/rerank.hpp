#pragma once

#include <vector>

#include "diformer/decoding/autoregressive.hpp"

namespace diformer {

/// Fills score_l2r and score_r2l of every candidate with fresh batched
/// scores (two decoder passes in total) and sets score to their mean.
void score_both_directions(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                           std::vector<Hypothesis>& candidates);

/// Index of the candidate with the best averaged two-direction score, ties
/// to the first. A single candidate is returned as is, without scoring.
std::size_t self_rerank(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                        std::vector<Hypothesis>& candidates);

/// Index of the highest `score`, ties to the first.
std::size_t best_by_score(const std::vector<Hypothesis>& candidates);

}  // namespace diformer
