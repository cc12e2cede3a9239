#include "diformer/corpus/batching.hpp"

#include <algorithm>
#include <numeric>

#include "diformer/error.hpp"
#include "diformer/numcore/rng.hpp"

namespace diformer {

TokenSeq PaddedBatch::src_row(std::size_t r) const {
  const auto row = src.row(static_cast<Eigen::Index>(r));
  return {row.data(), row.data() + src_lengths[r]};
}

TokenSeq PaddedBatch::tgt_row(std::size_t r) const {
  const auto row = tgt.row(static_cast<Eigen::Index>(r));
  return {row.data(), row.data() + tgt_lengths[r]};
}

PaddedBatch pad_pairs(std::span<const ParallelPair> pairs, std::span<const std::size_t> indices) {
  PaddedBatch b;
  Eigen::Index src_w = 0, tgt_w = 0;
  for (auto i : indices) {
    src_w = std::max<Eigen::Index>(src_w, static_cast<Eigen::Index>(pairs[i].src.size()));
    tgt_w = std::max<Eigen::Index>(tgt_w, static_cast<Eigen::Index>(pairs[i].tgt.size()));
  }
  const auto n = static_cast<Eigen::Index>(indices.size());
  b.src = TokenMatrix::Constant(n, src_w, kPad);
  b.tgt = TokenMatrix::Constant(n, tgt_w, kPad);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& p = pairs[indices[static_cast<std::size_t>(r)]];
    std::copy(p.src.begin(), p.src.end(), b.src.row(r).data());
    std::copy(p.tgt.begin(), p.tgt.end(), b.tgt.row(r).data());
    b.src_lengths.push_back(static_cast<Eigen::Index>(p.src.size()));
    b.tgt_lengths.push_back(static_cast<Eigen::Index>(p.tgt.size()));
    b.indices.push_back(indices[static_cast<std::size_t>(r)]);
  }
  return b;
}

std::vector<PaddedBatch> make_batches(std::span<const ParallelPair> pairs, int max_tokens, std::uint64_t seed) {
  auto width = [&](std::size_t i) { return std::max(pairs[i].src.size(), pairs[i].tgt.size()); };
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (static_cast<long>(width(i)) > max_tokens) {
      throw DataError("make_batches: pair " + std::to_string(i) + " of width " + std::to_string(width(i)) +
                      " exceeds max_tokens " + std::to_string(max_tokens));
    }
  }
  Rng rng = Rng(seed).stream("batches");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pairs[a].tgt.size() < pairs[b].tgt.size(); });

  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> current;
  std::size_t current_width = 0;
  for (auto i : order) {
    const std::size_t w = std::max(current_width, width(i));
    if (!current.empty() && static_cast<long>((current.size() + 1) * w) > max_tokens) {
      groups.push_back(std::move(current));
      current.clear();
      current_width = 0;
    }
    current.push_back(i);
    current_width = std::max(current_width, width(i));
  }
  if (!current.empty()) groups.push_back(std::move(current));
  rng.shuffle(groups);

  std::vector<PaddedBatch> batches;
  batches.reserve(groups.size());
  for (const auto& g : groups) batches.push_back(pad_pairs(pairs, g));
  return batches;
}

}  // namespace diformer
