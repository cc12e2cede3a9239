#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "diformer/types.hpp"

namespace diformer {

std::vector<std::string> split_tokens(std::string_view line);
std::string join_tokens(std::span<const std::string> tokens);

/// Token <-> id bijection with ids 0..4 reserved for PAD, BOS, EOS, UNK, MASK.
class Vocabulary {
 public:
  Vocabulary();

  /// Tokens with frequency >= min_count, ordered by (-frequency, token).
  /// Each line is whitespace-tokenized. Throws DataError on an empty corpus.
  static Vocabulary build(std::span<const std::string> lines, int min_count = 1);

  /// Non-reserved tokens in id order (first gets id 5).
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  /// Vocabulary file: one token per line, id = line index + 5.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(std::string_view token) const;
  /// UNK for unknown tokens.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  /// Non-reserved tokens in id order.
  std::vector<std::string> regular_tokens() const;

  /// [BOS, ids..., EOS]; out-of-vocabulary tokens map to UNK.
  TokenSeq encode(std::string_view line) const;
  TokenSeq encode(std::span<const std::string> tokens) const;
  /// Space-joined tokens with BOS, EOS and PAD removed.
  std::string decode(std::span<const TokenId> ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace diformer
