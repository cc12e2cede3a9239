#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diformer/corpus/vocabulary.hpp"
#include "diformer/numcore/rng.hpp"
#include "diformer/types.hpp"

namespace diformer {

/// Source and target id sequences, each wrapped as [BOS] ... [EOS].
struct ParallelPair {
  TokenSeq src;
  TokenSeq tgt;
  bool operator==(const ParallelPair&) const = default;
};

enum class TaskMode { Copy, Reverse, Lexmap };

TaskMode parse_task_mode(const std::string& name);
std::string task_mode_name(TaskMode mode);

struct TaskConfig {
  TaskMode mode = TaskMode::Lexmap;
  int vocab_size = 50;
  /// Content length range (tokens between BOS and EOS), inclusive.
  int min_len = 5;
  int max_len = 15;
  /// Probability that an adjacent source pair is emitted swapped (lexmap).
  double swap_prob = 0.3;
  /// Per-token probability of emitting the synonym of the substituted token
  /// instead of the token itself (lexmap only). Sampled, not a function of
  /// the source, so it makes the target distribution nondeterministic.
  double synonym_noise = 0.0;
  /// Longest total sequence (including BOS/EOS) the model accepts.
  int max_seq_len = 64;
  std::uint64_t seed = 1;
};

/// Synthetic translation task with a fixed vocabulary and mapping.
///
/// Source words are w0..w{V-1}. Copy and reverse emit the same words.
/// Lexmap substitutes every word through a seeded permutation and then walks
/// the sequence left to right, swapping the pair (i, i+1) and skipping ahead
/// when a hash of the two source words falls below swap_prob. The swap
/// decision depends only on the source, so the clean target is a function of
/// the source. With synonym noise, each target word wj may be replaced by vj.
class SyntheticTask {
 public:
  explicit SyntheticTask(TaskConfig config);

  const TaskConfig& config() const noexcept { return config_; }
  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  /// substitution()[a] is the target word index for source word index a.
  const std::vector<int>& substitution() const noexcept { return substitution_; }

  bool swaps(int left_word, int right_word) const;

  /// Clean (noise-free) target word indices for source word indices.
  std::vector<int> translate(const std::vector<int>& source_words) const;

  /// n random pairs. Noise is applied when `noisy` and synonym_noise > 0.
  std::vector<ParallelPair> sample(int n, Rng& rng, bool noisy = true) const;

  /// Id of word index w, or of its synonym.
  TokenId word_id(int w) const;
  TokenId synonym_id(int w) const;
  /// Word index of a word or synonym id, -1 otherwise.
  int word_index(TokenId id) const;

 private:
  TaskConfig config_;
  Vocabulary vocab_;
  std::vector<int> substitution_;
  std::uint64_t swap_key_;
};

/// Convenience wrapper: n_pairs pairs drawn from a task built from `config`.
std::vector<ParallelPair> gen_synthetic_pairs(const TaskConfig& config, int n_pairs);

}  // namespace diformer
