#pragma once

#include <span>

#include "diformer/numcore/rng.hpp"
#include "diformer/numcore/tensor.hpp"
#include "diformer/types.hpp"

namespace diformer {

// Differentiable primitives. Each takes the tape it records on; when the tape
// is not recording, or no input requires a gradient, nothing is retained.
//
// Forward products are evaluated one output row at a time so that the value
// of a row never depends on where it sits in the operand. The decoder's
// mirror-equivariance guarantee relies on this.

/// a[..., k] x b[k, n] -> [..., n].
template <typename Scalar>
Var<Scalar> matmul(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& b);

/// a[..., k] x b[n, k]^T -> [..., n].
template <typename Scalar>
Var<Scalar> matmul_nt(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& b);

template <typename Scalar>
Var<Scalar> add(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& b);

/// a[..., n] + bias[n], broadcast over rows.
template <typename Scalar>
Var<Scalar> add_bias(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& bias);

template <typename Scalar>
Var<Scalar> scale(Tape<Scalar>& tape, const Var<Scalar>& a, Scalar factor);

/// Elementwise product.
template <typename Scalar>
Var<Scalar> mul(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& b);

template <typename Scalar>
Var<Scalar> relu(Tape<Scalar>& tape, const Var<Scalar>& a);

/// Inverted dropout. Identity when rate == 0.
template <typename Scalar>
Var<Scalar> dropout(Tape<Scalar>& tape, const Var<Scalar>& a, double rate, Rng& rng);

/// Per-row normalization to zero mean and unit variance, then gain and bias.
template <typename Scalar>
Var<Scalar> layer_norm(Tape<Scalar>& tape, const Var<Scalar>& x, const Var<Scalar>& gain,
                       const Var<Scalar>& bias, Scalar eps = Scalar(1e-5));

/// Row reference into one of several tables for gather_rows.
struct RowRef {
  int table = 0;
  Index row = 0;
};

/// Stacks the referenced rows; backward scatters into the source tables.
template <typename Scalar>
Var<Scalar> gather_rows(Tape<Scalar>& tape, std::span<const Var<Scalar>> tables,
                        std::span<const RowRef> refs);

template <typename Scalar>
Var<Scalar> embedding(Tape<Scalar>& tape, const Var<Scalar>& table, std::span<const TokenId> ids);

/// Softmax over the last axis. Masked logits are replaced by -inf before
/// exponentiation, so masked outputs are exactly 0. Throws EmptyContextError
/// for a row without any unmasked entry.
template <typename Scalar>
Var<Scalar> masked_softmax(Tape<Scalar>& tape, const Var<Scalar>& logits, const Mask& mask);

/// Mean negative log-softmax over rows whose target is not `ignore`.
template <typename Scalar>
Var<Scalar> cross_entropy(Tape<Scalar>& tape, const Var<Scalar>& logits,
                          std::span<const TokenId> targets, TokenId ignore = kIgnore);

template <typename Scalar>
Var<Scalar> sum(Tape<Scalar>& tape, const Var<Scalar>& a);

/// Row means over contiguous segments: out[b] = mean(x[offsets[b] .. offsets[b]+lengths[b])).
template <typename Scalar>
Var<Scalar> segment_mean(Tape<Scalar>& tape, const Var<Scalar>& x, std::span<const Index> offsets,
                         std::span<const Index> lengths);

/// Numerically stable log-softmax of one row (no gradient).
template <typename Scalar>
RowVector<Scalar> log_softmax(const Eigen::Ref<const RowVector<Scalar>>& logits);

/// Throws NonFiniteError naming `what` if any value is NaN or Inf.
template <typename Scalar>
void check_finite(const Matrix<Scalar>& m, const std::string& what);

}  // namespace diformer
