#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "diformer/corpus/tasks.hpp"
#include "diformer/corpus/vocabulary.hpp"

namespace diformer {

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, std::span<const std::string> lines);

struct LoadedPairs {
  std::vector<ParallelPair> pairs;
  /// Lines skipped because either side exceeded the length limit.
  std::size_t dropped = 0;
};

/// Line i of each file forms pair i. Pairs whose encoded source or target is
/// longer than `max_seq_len` are dropped and counted (and logged to stderr).
LoadedPairs load_parallel_file(const std::filesystem::path& src_path, const std::filesystem::path& tgt_path,
                               const Vocabulary& vocab, int max_seq_len);

/// Writes <prefix>.src and <prefix>.tgt.
void write_parallel_file(const std::filesystem::path& prefix, std::span<const ParallelPair> pairs,
                         const Vocabulary& vocab);

}  // namespace diformer
