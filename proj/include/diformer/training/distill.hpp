#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "diformer/corpus/tasks.hpp"
#include "diformer/model/model.hpp"

namespace diformer {

/// Replaces every target with the teacher's best L2R beam output. Sources
/// are kept. When decoding fails or never reaches EOS the original target is
/// kept and the pair index is written to `log`.
std::vector<ParallelPair> distill_pairs(const Model<float>& teacher, std::span<const ParallelPair> pairs,
                                        int beam = 4, std::ostream* log = nullptr);

}  // namespace diformer
