#include "diformer/corpus/tasks.hpp"

#include <algorithm>
#include <numeric>

#include "diformer/error.hpp"

namespace diformer {

TaskMode parse_task_mode(const std::string& name) {
  if (name == "copy") return TaskMode::Copy;
  if (name == "reverse") return TaskMode::Reverse;
  if (name == "lexmap") return TaskMode::Lexmap;
  throw ConfigError("unknown task '" + name + "' (expected copy, reverse or lexmap)");
}

std::string task_mode_name(TaskMode mode) {
  switch (mode) {
    case TaskMode::Copy: return "copy";
    case TaskMode::Reverse: return "reverse";
    case TaskMode::Lexmap: return "lexmap";
  }
  return "?";
}

SyntheticTask::SyntheticTask(TaskConfig config) : config_(config) {
  if (config_.vocab_size < 10) throw DataError("synthetic task: vocab_size must be at least 10");
  if (config_.min_len < 1 || config_.max_len < config_.min_len) {
    throw DataError("synthetic task: invalid length range");
  }
  if (config_.max_len + 2 > config_.max_seq_len) {
    throw DataError("synthetic task: max_len + 2 exceeds the maximum sequence length");
  }
  if (config_.swap_prob < 0.0 || config_.swap_prob > 1.0 || config_.synonym_noise < 0.0 ||
      config_.synonym_noise > 1.0) {
    throw DataError("synthetic task: probabilities must lie in [0, 1]");
  }

  std::vector<std::string> tokens;
  for (int w = 0; w < config_.vocab_size; ++w) tokens.push_back("w" + std::to_string(w));
  if (config_.mode == TaskMode::Lexmap && config_.synonym_noise > 0.0) {
    for (int w = 0; w < config_.vocab_size; ++w) tokens.push_back("v" + std::to_string(w));
  }
  vocab_ = Vocabulary::from_tokens(tokens);

  Rng rng = Rng(config_.seed).stream("task.mapping");
  substitution_.resize(static_cast<std::size_t>(config_.vocab_size));
  std::iota(substitution_.begin(), substitution_.end(), 0);
  if (config_.mode == TaskMode::Lexmap) rng.shuffle(substitution_);
  swap_key_ = rng.next_u64();
}

bool SyntheticTask::swaps(int left_word, int right_word) const {
  const std::uint64_t h =
      splitmix64(swap_key_ ^ (static_cast<std::uint64_t>(left_word) * 1000003ULL + std::uint64_t(right_word)));
  return static_cast<double>(h >> 11) * 0x1.0p-53 < config_.swap_prob;
}

std::vector<int> SyntheticTask::translate(const std::vector<int>& src) const {
  std::vector<int> out;
  switch (config_.mode) {
    case TaskMode::Copy:
      return src;
    case TaskMode::Reverse:
      return {src.rbegin(), src.rend()};
    case TaskMode::Lexmap:
      out.reserve(src.size());
      for (std::size_t i = 0; i < src.size();) {
        if (i + 1 < src.size() && swaps(src[i], src[i + 1])) {
          out.push_back(substitution_[static_cast<std::size_t>(src[i + 1])]);
          out.push_back(substitution_[static_cast<std::size_t>(src[i])]);
          i += 2;
        } else {
          out.push_back(substitution_[static_cast<std::size_t>(src[i])]);
          i += 1;
        }
      }
      return out;
  }
  return out;
}

TokenId SyntheticTask::word_id(int w) const { return kNumReserved + w; }

TokenId SyntheticTask::synonym_id(int w) const {
  if (vocab_.size() < static_cast<std::size_t>(kNumReserved + 2 * config_.vocab_size)) {
    throw DataError("synthetic task has no synonyms");
  }
  return kNumReserved + config_.vocab_size + w;
}

int SyntheticTask::word_index(TokenId id) const {
  const int i = id - kNumReserved;
  if (i < 0 || static_cast<std::size_t>(id) >= vocab_.size()) return -1;
  return i % config_.vocab_size;
}

std::vector<ParallelPair> SyntheticTask::sample(int n, Rng& rng, bool noisy) const {
  if (n < 0) throw DataError("synthetic task: negative pair count");
  const bool add_noise = noisy && config_.mode == TaskMode::Lexmap && config_.synonym_noise > 0.0;
  std::vector<ParallelPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    const int len = rng.uniform_int(config_.min_len, config_.max_len);
    std::vector<int> src(static_cast<std::size_t>(len));
    for (auto& w : src) w = rng.uniform_int(0, config_.vocab_size - 1);
    const auto tgt = translate(src);
    ParallelPair pair;
    pair.src.push_back(kBos);
    for (int w : src) pair.src.push_back(word_id(w));
    pair.src.push_back(kEos);
    pair.tgt.push_back(kBos);
    for (int w : tgt) pair.tgt.push_back(add_noise && rng.bernoulli(config_.synonym_noise) ? synonym_id(w) : word_id(w));
    pair.tgt.push_back(kEos);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<ParallelPair> gen_synthetic_pairs(const TaskConfig& config, int n_pairs) {
  SyntheticTask task(config);
  Rng rng = Rng(config.seed).stream("task.pairs");
  return task.sample(n_pairs, rng);
}

}  // namespace diformer
