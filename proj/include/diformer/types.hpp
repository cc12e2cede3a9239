#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace diformer {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

/// Reserved vocabulary ids.
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kMask = 4;
inline constexpr TokenId kNumReserved = 5;

/// Target id that contributes no loss.
inline constexpr TokenId kIgnore = -1;

/// Per-position generation direction: R predicts the right neighbour from the
/// prefix, L predicts the left neighbour from the suffix, S predicts the token
/// in place from a partially observed sequence.
enum class Direction : std::uint8_t { R = 0, S = 1, L = 2 };

using DirectionSeq = std::vector<Direction>;

constexpr char direction_char(Direction z) {
  switch (z) {
    case Direction::R: return 'R';
    case Direction::S: return 'S';
    case Direction::L: return 'L';
  }
  return '?';
}

/// R <-> L, S fixed.
constexpr Direction mirrored(Direction z) {
  return z == Direction::R ? Direction::L : z == Direction::L ? Direction::R : Direction::S;
}

}  // namespace diformer
