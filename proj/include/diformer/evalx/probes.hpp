#pragma once

#include <vector>

#include "diformer/model/forward.hpp"
#include "diformer/training/objective.hpp"

namespace diformer {

struct LeakageViolation {
  std::size_t example = 0;
  Index query = 0;
  Index key = 0;
  bool operator==(const LeakageViolation&) const = default;
};

/// For every example and every key hidden from at least one query, replaces
/// that key's word with a different random regular id, reruns the decoder
/// and compares every row that hides the key against the unperturbed logits
/// bitwise. Each perturbation checks all hiding rows at once, so the search
/// is exhaustive over (query, hidden key) pairs at any length.
std::vector<LeakageViolation> leakage_probe(const Model<float>& model, const TrainBatch& batch, Rng& rng);

/// Parameter transposition: swaps the two decoder position banks and the R
/// and L direction rows, and reverses both relative tables row-wise.
template <typename Scalar>
Model<Scalar> mirror_model(const Model<Scalar>& model);

/// Input transposition: reverses the tokens, reverses the directions with R
/// and L exchanged, and reverses the mask along both axes.
DecoderExample mirror_example(const DecoderExample& example);

}  // namespace diformer
