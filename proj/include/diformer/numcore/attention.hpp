#pragma once

#include <memory>
#include <vector>

#include "diformer/numcore/tensor.hpp"

namespace diformer {

/// One independent attention problem inside a packed batch: queries
/// [query_begin, query_begin + query_len) attend over keys
/// [key_begin, key_begin + key_len). `mask` indexes AttentionLayout::masks
/// (query_len x key_len, true = hidden); -1 leaves every key visible.
struct AttentionBlock {
  Index query_begin = 0;
  Index query_len = 0;
  Index key_begin = 0;
  Index key_len = 0;
  int mask = -1;
};

struct AttentionLayout {
  std::vector<AttentionBlock> blocks;
  std::vector<Mask> masks;
};

/// Learned relative-position tables, each [2k+1, d_head], shared by all heads.
template <typename Scalar>
struct RelativeTables {
  Var<Scalar> key;
  Var<Scalar> value;
  int max_distance = 1;
};

/// Row of a relative table for query i and key j: clip(j - i, -k, k) + k.
constexpr Index relative_index(Index i, Index j, int k) {
  const Index d = j - i;
  const Index clipped = d < -k ? -k : (d > k ? k : d);
  return clipped + k;
}

/// Multi-head scaled dot-product attention over packed blocks.
///
/// With relative tables, score and output follow the relative-position form
///   e_ij = q_i . (k_j + Rk[r(i,j)]) / sqrt(d_head)
///   o_i  = sum_j a_ij (v_j + Rv[r(i,j)])
/// Masked keys get -inf scores and contribute exactly zero. Sums over keys
/// pair key m with key n-1-m before accumulating, which makes every output
/// row bitwise invariant under reversing the key order together with the
/// relative tables.
template <typename Scalar>
Var<Scalar> attention(Tape<Scalar>& tape, const Var<Scalar>& q, const Var<Scalar>& k, const Var<Scalar>& v,
                      std::shared_ptr<const AttentionLayout> layout, int n_heads,
                      const RelativeTables<Scalar>* relative = nullptr);

}  // namespace diformer
