#include "diformer/training/distill.hpp"

#include <ostream>

#include "diformer/decoding/autoregressive.hpp"
#include "diformer/error.hpp"

namespace diformer {

std::vector<ParallelPair> distill_pairs(const Model<float>& teacher, std::span<const ParallelPair> pairs, int beam,
                                        std::ostream* log) {
  std::vector<ParallelPair> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    ParallelPair p = pairs[i];
    try {
      const auto enc = encode_source(teacher, p.src);
      const auto hyps = beam_ar(teacher, enc, 0, Direction::R, beam);
      if (hyps.front().finished && hyps.front().tokens.size() >= 3) {
        p.tgt = hyps.front().tokens;
      } else if (log) {
        *log << "distill: pair " << i << " kept its original target (no finished hypothesis)\n";
      }
    } catch (const Error& e) {
      if (log) *log << "distill: pair " << i << " kept its original target: " << e.what() << '\n';
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace diformer
