#include "diformer/numcore/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace diformer {

namespace {

template <typename Scalar>
Shape with_last(const Shape& s, Index last) {
  Shape out = s.empty() ? Shape{1} : s;
  out.back() = last;
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace

template <typename Scalar>
Var<Scalar> matmul(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& b) {
  require(b->rank() == 2, "matmul: right operand must be rank 2, got " + shape_string(b->shape()));
  require(a->cols() == b->rows(), "matmul: inner extents differ: " + shape_string(a->shape()) + " x " +
                                      shape_string(b->shape()));
  const auto& av = a->value();
  const auto& bv = b->value();
  Matrix<Scalar> out(av.rows(), bv.cols());
  for (Index i = 0; i < av.rows(); ++i) out.row(i).noalias() = av.row(i) * bv;
  auto result = make_var<Scalar>(with_last<Scalar>(a->shape(), bv.cols()), std::move(out),
                                 a->requires_grad() || b->requires_grad());
  if (tape.tracks(a, b)) {
    tape.push([a, b, out = result.get()] {
      const auto& g = out->grad();
      if (a->requires_grad()) a->grad().noalias() += g * b->value().transpose();
      if (b->requires_grad()) b->grad().noalias() += a->value().transpose() * g;
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> matmul_nt(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& b) {
  require(b->rank() == 2, "matmul_nt: right operand must be rank 2");
  require(a->cols() == b->cols(), "matmul_nt: inner extents differ: " + shape_string(a->shape()) +
                                      " x " + shape_string(b->shape()) + "^T");
  const auto& av = a->value();
  const auto& bv = b->value();
  Matrix<Scalar> out(av.rows(), bv.rows());
  for (Index i = 0; i < av.rows(); ++i) out.row(i).noalias() = av.row(i) * bv.transpose();
  auto result = make_var<Scalar>(with_last<Scalar>(a->shape(), bv.rows()), std::move(out),
                                 a->requires_grad() || b->requires_grad());
  if (tape.tracks(a, b)) {
    tape.push([a, b, out = result.get()] {
      const auto& g = out->grad();
      if (a->requires_grad()) a->grad().noalias() += g * b->value();
      if (b->requires_grad()) b->grad().noalias() += g.transpose() * a->value();
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> add(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& b) {
  require(a->shape() == b->shape(),
          "add: shapes differ: " + shape_string(a->shape()) + " vs " + shape_string(b->shape()));
  auto result = make_var<Scalar>(a->shape(), a->value() + b->value(),
                                 a->requires_grad() || b->requires_grad());
  if (tape.tracks(a, b)) {
    tape.push([a, b, out = result.get()] {
      if (a->requires_grad()) a->grad() += out->grad();
      if (b->requires_grad()) b->grad() += out->grad();
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> add_bias(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& bias) {
  require(bias->numel() == a->cols(), "add_bias: bias length " + std::to_string(bias->numel()) +
                                          " does not match " + shape_string(a->shape()));
  Matrix<Scalar> out = a->value();
  const auto brow = bias->value().row(0);
  out.rowwise() += brow;
  auto result = make_var<Scalar>(a->shape(), std::move(out), a->requires_grad() || bias->requires_grad());
  if (tape.tracks(a, bias)) {
    tape.push([a, bias, out = result.get()] {
      if (a->requires_grad()) a->grad() += out->grad();
      if (bias->requires_grad()) {
        bias->grad() += out->grad().colwise().sum();
      }
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> scale(Tape<Scalar>& tape, const Var<Scalar>& a, Scalar factor) {
  auto result = make_var<Scalar>(a->shape(), a->value() * factor, a->requires_grad());
  if (tape.tracks(a)) {
    tape.push([a, factor, out = result.get()] { a->grad() += out->grad() * factor; });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> mul(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& b) {
  require(a->shape() == b->shape(),
          "mul: shapes differ: " + shape_string(a->shape()) + " vs " + shape_string(b->shape()));
  auto result = make_var<Scalar>(a->shape(), a->value().cwiseProduct(b->value()),
                                 a->requires_grad() || b->requires_grad());
  if (tape.tracks(a, b)) {
    tape.push([a, b, out = result.get()] {
      if (a->requires_grad()) a->grad() += out->grad().cwiseProduct(b->value());
      if (b->requires_grad()) b->grad() += out->grad().cwiseProduct(a->value());
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> relu(Tape<Scalar>& tape, const Var<Scalar>& a) {
  auto result = make_var<Scalar>(a->shape(), a->value().cwiseMax(Scalar(0)), a->requires_grad());
  if (tape.tracks(a)) {
    tape.push([a, out = result.get()] {
      a->grad().array() += (a->value().array() > Scalar(0)).select(out->grad().array(), Scalar(0));
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> dropout(Tape<Scalar>& tape, const Var<Scalar>& a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw Error("dropout rate must be below 1");
  const Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
  Matrix<Scalar> keep(a->rows(), a->cols());
  for (Index i = 0; i < keep.size(); ++i) keep.data()[i] = rng.uniform() < rate ? Scalar(0) : keep_scale;
  auto result = make_var<Scalar>(a->shape(), a->value().cwiseProduct(keep), a->requires_grad());
  if (tape.tracks(a)) {
    tape.push([a, keep = std::move(keep), out = result.get()] {
      a->grad() += out->grad().cwiseProduct(keep);
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> layer_norm(Tape<Scalar>& tape, const Var<Scalar>& x, const Var<Scalar>& gain,
                       const Var<Scalar>& bias, Scalar eps) {
  const Index d = x->cols();
  require(d > 0, "layer_norm: empty feature axis");
  require(gain->numel() == d && bias->numel() == d, "layer_norm: gain/bias length mismatch");
  const auto& xv = x->value();
  const auto& g = gain->value();
  const auto& b = bias->value();
  Matrix<Scalar> normalized(xv.rows(), d);
  RowVector<Scalar> inv_std(xv.rows());
  Matrix<Scalar> out(xv.rows(), d);
  for (Index i = 0; i < xv.rows(); ++i) {
    const Scalar mean = xv.row(i).sum() / Scalar(d);
    const auto centered = (xv.row(i).array() - mean).matrix();
    const Scalar var = centered.squaredNorm() / Scalar(d);
    inv_std(i) = Scalar(1) / std::sqrt(var + eps);
    normalized.row(i) = centered * inv_std(i);
    out.row(i) = normalized.row(i).cwiseProduct(g) + b;
  }
  auto result = make_var<Scalar>(x->shape(), std::move(out),
                                 x->requires_grad() || gain->requires_grad() || bias->requires_grad());
  if (tape.tracks(x, gain, bias)) {
    tape.push([x, gain, bias, normalized = std::move(normalized), inv_std = std::move(inv_std),
               out = result.get()] {
      const auto& dy = out->grad();
      const Index d = dy.cols();
      if (gain->requires_grad()) {
        gain->grad() += dy.cwiseProduct(normalized).colwise().sum();
      }
      if (bias->requires_grad()) bias->grad() += dy.colwise().sum();
      if (x->requires_grad()) {
        const auto& g = gain->value();
        auto& dx = x->grad();
        for (Index i = 0; i < dy.rows(); ++i) {
          const RowVector<Scalar> dn = dy.row(i).cwiseProduct(g);
          const Scalar mean_dn = dn.sum() / Scalar(d);
          const Scalar mean_dn_n = dn.dot(normalized.row(i)) / Scalar(d);
          dx.row(i) += inv_std(i) * (dn.array() - mean_dn - normalized.row(i).array() * mean_dn_n).matrix();
        }
      }
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> gather_rows(Tape<Scalar>& tape, std::span<const Var<Scalar>> tables,
                        std::span<const RowRef> refs) {
  require(!tables.empty(), "gather_rows: no tables");
  const Index d = tables.front()->cols();
  bool any_grad = false;
  for (const auto& t : tables) {
    require(t->rank() == 2 && t->cols() == d, "gather_rows: tables must be rank 2 with equal width");
    any_grad = any_grad || t->requires_grad();
  }
  Matrix<Scalar> out(static_cast<Index>(refs.size()), d);
  for (std::size_t r = 0; r < refs.size(); ++r) {
    const auto& ref = refs[r];
    require(ref.table >= 0 && ref.table < static_cast<int>(tables.size()), "gather_rows: bad table index");
    const auto& table = tables[ref.table]->value();
    require(ref.row >= 0 && ref.row < table.rows(),
            "gather_rows: row " + std::to_string(ref.row) + " outside table of " +
                std::to_string(table.rows()) + " rows");
    out.row(static_cast<Index>(r)) = table.row(ref.row);
  }
  auto result = make_var<Scalar>(Shape{static_cast<Index>(refs.size()), d}, std::move(out), any_grad);
  if (tape.recording() && any_grad) {
    std::vector<Var<Scalar>> held(tables.begin(), tables.end());
    std::vector<RowRef> rows(refs.begin(), refs.end());
    tape.push([held = std::move(held), rows = std::move(rows), out = result.get()] {
      const auto& g = out->grad();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        auto& table = *held[rows[r].table];
        if (table.requires_grad()) table.grad().row(rows[r].row) += g.row(static_cast<Index>(r));
      }
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> embedding(Tape<Scalar>& tape, const Var<Scalar>& table, std::span<const TokenId> ids) {
  std::vector<RowRef> refs(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) refs[i] = RowRef{0, ids[i]};
  const Var<Scalar> tables[] = {table};
  return gather_rows<Scalar>(tape, tables, refs);
}

template <typename Scalar>
Var<Scalar> masked_softmax(Tape<Scalar>& tape, const Var<Scalar>& logits, const Mask& mask) {
  const auto& x = logits->value();
  require(mask.rows() == x.rows() && mask.cols() == x.cols(),
          "masked_softmax: mask does not match logits " + shape_string(logits->shape()));
  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    Scalar max = kNegInf;
    for (Index j = 0; j < x.cols(); ++j) {
      if (!mask(i, j)) max = std::max(max, x(i, j));
    }
    if (mask.row(i).all()) throw EmptyContextError("masked_softmax: row " + std::to_string(i) + " is fully masked (empty context)");
    Scalar total = 0;
    for (Index j = 0; j < x.cols(); ++j) {
      const Scalar logit = mask(i, j) ? kNegInf : x(i, j);
      y(i, j) = std::exp(logit - max);
      total += y(i, j);
    }
    y.row(i) /= total;
  }
  auto result = make_var<Scalar>(logits->shape(), std::move(y), logits->requires_grad());
  if (tape.tracks(logits)) {
    tape.push([logits, out = result.get()] {
      const auto& y = out->value();
      const auto& dy = out->grad();
      auto& dx = logits->grad();
      for (Index i = 0; i < y.rows(); ++i) {
        const Scalar inner = y.row(i).dot(dy.row(i));
        dx.row(i).array() += y.row(i).array() * (dy.row(i).array() - inner);
      }
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> cross_entropy(Tape<Scalar>& tape, const Var<Scalar>& logits, std::span<const TokenId> targets,
                          TokenId ignore) {
  const auto& x = logits->value();
  require(static_cast<Index>(targets.size()) == x.rows(),
          "cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(x.rows()) +
              " rows");
  Index count = 0;
  Scalar total = 0;
  Matrix<Scalar> probs(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const TokenId t = targets[static_cast<std::size_t>(i)];
    if (t == ignore) continue;
    if (t < 0 || t >= x.cols()) {
      throw DimensionError("cross_entropy: target id " + std::to_string(t) + " outside vocabulary of " +
                           std::to_string(x.cols()));
    }
    const Scalar max = x.row(i).maxCoeff();
    probs.row(i) = (x.row(i).array() - max).exp().matrix();
    const Scalar z = probs.row(i).sum();
    probs.row(i) /= z;
    total += max + std::log(z) - x(i, t);
    ++count;
  }
  if (count == 0) throw Error("cross_entropy: no loss targets (every position ignored)");
  auto result = make_var<Scalar>(Tensor<Scalar>::scalar(total / Scalar(count)));
  result->set_requires_grad(logits->requires_grad());
  if (tape.tracks(logits)) {
    std::vector<TokenId> held(targets.begin(), targets.end());
    tape.push([logits, held = std::move(held), probs = std::move(probs), count, ignore, out = result.get()] {
      const Scalar g = out->grad()(0, 0) / Scalar(count);
      auto& dx = logits->grad();
      for (Index i = 0; i < dx.rows(); ++i) {
        const TokenId t = held[static_cast<std::size_t>(i)];
        if (t == ignore) continue;
        dx.row(i) += g * probs.row(i);
        dx(i, t) -= g;
      }
    });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> sum(Tape<Scalar>& tape, const Var<Scalar>& a) {
  auto result = make_var<Scalar>(Tensor<Scalar>::scalar(a->value().sum()));
  result->set_requires_grad(a->requires_grad());
  if (tape.tracks(a)) {
    tape.push([a, out = result.get()] { a->grad().array() += out->grad()(0, 0); });
  }
  return result;
}

template <typename Scalar>
Var<Scalar> segment_mean(Tape<Scalar>& tape, const Var<Scalar>& x, std::span<const Index> offsets,
                         std::span<const Index> lengths) {
  require(offsets.size() == lengths.size(), "segment_mean: offsets/lengths size mismatch");
  const auto& xv = x->value();
  Matrix<Scalar> out(static_cast<Index>(offsets.size()), xv.cols());
  for (std::size_t b = 0; b < offsets.size(); ++b) {
    require(lengths[b] > 0 && offsets[b] >= 0 && offsets[b] + lengths[b] <= xv.rows(),
            "segment_mean: segment out of range");
    out.row(static_cast<Index>(b)) = xv.middleRows(offsets[b], lengths[b]).colwise().sum() / Scalar(lengths[b]);
  }
  auto result = make_var<Scalar>(Shape{static_cast<Index>(offsets.size()), xv.cols()}, std::move(out),
                                 x->requires_grad());
  if (tape.tracks(x)) {
    std::vector<Index> offs(offsets.begin(), offsets.end());
    std::vector<Index> lens(lengths.begin(), lengths.end());
    tape.push([x, offs = std::move(offs), lens = std::move(lens), out = result.get()] {
      auto& dx = x->grad();
      const auto& g = out->grad();
      for (std::size_t b = 0; b < offs.size(); ++b) {
        dx.middleRows(offs[b], lens[b]).rowwise() += g.row(static_cast<Index>(b)) / Scalar(lens[b]);
      }
    });
  }
  return result;
}

template <typename Scalar>
RowVector<Scalar> log_softmax(const Eigen::Ref<const RowVector<Scalar>>& logits) {
  const Scalar max = logits.maxCoeff();
  const Scalar lse = max + std::log((logits.array() - max).exp().sum());
  return (logits.array() - lse).matrix();
}

template <typename Scalar>
void check_finite(const Matrix<Scalar>& m, const std::string& what) {
  if (!m.allFinite()) throw NonFiniteError("non-finite values in " + what);
}

#define DIFORMER_INSTANTIATE_OPS(S)                                                                 \
  template Var<S> matmul<S>(Tape<S>&, const Var<S>&, const Var<S>&);                                \
  template Var<S> matmul_nt<S>(Tape<S>&, const Var<S>&, const Var<S>&);                             \
  template Var<S> add<S>(Tape<S>&, const Var<S>&, const Var<S>&);                                   \
  template Var<S> add_bias<S>(Tape<S>&, const Var<S>&, const Var<S>&);                              \
  template Var<S> scale<S>(Tape<S>&, const Var<S>&, S);                                             \
  template Var<S> mul<S>(Tape<S>&, const Var<S>&, const Var<S>&);                                   \
  template Var<S> relu<S>(Tape<S>&, const Var<S>&);                                                 \
  template Var<S> dropout<S>(Tape<S>&, const Var<S>&, double, Rng&);                                \
  template Var<S> layer_norm<S>(Tape<S>&, const Var<S>&, const Var<S>&, const Var<S>&, S);          \
  template Var<S> gather_rows<S>(Tape<S>&, std::span<const Var<S>>, std::span<const RowRef>);       \
  template Var<S> embedding<S>(Tape<S>&, const Var<S>&, std::span<const TokenId>);                  \
  template Var<S> masked_softmax<S>(Tape<S>&, const Var<S>&, const Mask&);                          \
  template Var<S> cross_entropy<S>(Tape<S>&, const Var<S>&, std::span<const TokenId>, TokenId);     \
  template Var<S> sum<S>(Tape<S>&, const Var<S>&);                                                  \
  template Var<S> segment_mean<S>(Tape<S>&, const Var<S>&, std::span<const Index>,                  \
                                  std::span<const Index>);                                          \
  template RowVector<S> log_softmax<S>(const Eigen::Ref<const RowVector<S>>&);                      \
  template void check_finite<S>(const Matrix<S>&, const std::string&);

DIFORMER_INSTANTIATE_OPS(float)
DIFORMER_INSTANTIATE_OPS(double)

}  // namespace diformer
