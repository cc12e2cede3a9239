#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "diformer/corpus/tasks.hpp"

namespace diformer {

using TokenMatrix = Eigen::Matrix<TokenId, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// PAD-filled source and target matrices for a set of pairs.
struct PaddedBatch {
  TokenMatrix src;
  TokenMatrix tgt;
  std::vector<Eigen::Index> src_lengths;
  std::vector<Eigen::Index> tgt_lengths;
  /// Position of each row's pair in the input list.
  std::vector<std::size_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
  /// Row r with padding removed.
  TokenSeq src_row(std::size_t r) const;
  TokenSeq tgt_row(std::size_t r) const;
};

PaddedBatch pad_pairs(std::span<const ParallelPair> pairs, std::span<const std::size_t> indices);

/// Shuffles with `seed`, buckets by target length and packs greedily so that
/// rows x (widest source or target in the batch) <= max_tokens. Every pair
/// lands in exactly one batch. Throws DataError if a single pair is too wide.
std::vector<PaddedBatch> make_batches(std::span<const ParallelPair> pairs, int max_tokens, std::uint64_t seed);

}  // namespace diformer
