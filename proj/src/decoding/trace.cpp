#include "diformer/decoding/trace.hpp"

#include <sstream>

namespace diformer {

std::string format_tokens(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (auto id : ids) {
    if (!out.empty()) out += ' ';
    switch (id) {
      case kBos: out += "[B]"; break;
      case kEos: out += "[E]"; break;
      case kMask: out += "-"; break;
      default: out += vocab.token(id);
    }
  }
  return out;
}

std::string format_directions(const DirectionSeq& z) {
  std::string out;
  for (auto d : z) {
    if (!out.empty()) out += ' ';
    out += direction_char(d);
  }
  return out;
}

std::string format_trace(const Trace& trace, const Vocabulary& vocab) {
  std::ostringstream os;
  for (const auto& note : trace.notes) os << "# " << note << '\n';
  for (const auto& s : trace.steps) {
    os << s.step << '\t' << format_tokens(s.output, vocab) << '\t' << format_tokens(s.context, vocab) << '\t'
       << format_directions(s.directions) << '\n';
  }
  return os.str();
}

}  // namespace diformer
