#include "diformer/corpus/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "diformer/error.hpp"

namespace diformer {

namespace {

constexpr const char* kReservedTokens[] = {"<pad>", "<s>", "</s>", "<unk>", "<mask>"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

}  // namespace

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* t : kReservedTokens) add(t);
}

void Vocabulary::add(std::string token) {
  const auto id = static_cast<TokenId>(tokens_.size());
  auto [it, inserted] = ids_.emplace(token, id);
  if (!inserted) throw DataError("vocabulary: duplicate token '" + token + "'");
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(std::span<const std::string> lines, int min_count) {
  std::map<std::string, long> counts;
  for (const auto& line : lines) {
    for (auto& tok : split_tokens(line)) ++counts[tok];
  }
  if (counts.empty()) throw DataError("vocabulary: empty corpus");
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (auto& [tok, n] : ranked) {
    if (n >= min_count && !v.contains(tok)) v.add(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  Vocabulary v;
  for (const auto& t : tokens) v.add(t);
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocabulary file " + path.string());
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    auto toks = split_tokens(line);
    if (toks.size() != 1) throw DataError("vocabulary file " + path.string() + ": expected one token per line");
    v.add(std::move(toks.front()));
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file " + path.string());
  for (std::size_t i = kNumReserved; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

bool Vocabulary::contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocabulary::regular_tokens() const {
  return {tokens_.begin() + kNumReserved, tokens_.end()};
}

TokenSeq Vocabulary::encode(std::string_view line) const {
  const auto toks = split_tokens(line);
  return encode(toks);
}

TokenSeq Vocabulary::encode(std::span<const std::string> tokens) const {
  TokenSeq ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(kBos);
  for (const auto& t : tokens) ids.push_back(id(t));
  ids.push_back(kEos);
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == kBos || id == kEos || id == kPad) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

}  // namespace diformer
