#include "diformer/numcore/attention.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace diformer {

namespace {

void check_layout(const AttentionLayout& layout, Index q_rows, Index k_rows) {
  for (const auto& b : layout.blocks) {
    if (b.query_len <= 0 || b.key_len <= 0 || b.query_begin < 0 || b.key_begin < 0 ||
        b.query_begin + b.query_len > q_rows || b.key_begin + b.key_len > k_rows) {
      throw DimensionError("attention: block outside packed operands");
    }
    if (b.mask >= 0) {
      if (b.mask >= static_cast<int>(layout.masks.size())) throw DimensionError("attention: bad mask index");
      const Mask& m = layout.masks[static_cast<std::size_t>(b.mask)];
      if (m.rows() != b.query_len || m.cols() != b.key_len) {
        throw DimensionError("attention: mask is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                             ", block is " + std::to_string(b.query_len) + "x" + std::to_string(b.key_len));
      }
    }
  }
}

}  // namespace

template <typename Scalar>
Var<Scalar> attention(Tape<Scalar>& tape, const Var<Scalar>& q, const Var<Scalar>& k, const Var<Scalar>& v,
                      std::shared_ptr<const AttentionLayout> layout, int n_heads,
                      const RelativeTables<Scalar>* relative) {
  const Index d = q->cols();
  if (n_heads <= 0 || d % n_heads != 0) throw DimensionError("attention: width not divisible by heads");
  if (k->cols() != d || v->cols() != d || k->rows() != v->rows()) {
    throw DimensionError("attention: q/k/v widths differ");
  }
  const Index dh = d / n_heads;
  const bool use_rel = relative != nullptr;
  if (use_rel) {
    const Index rows = 2 * Index(relative->max_distance) + 1;
    if (relative->key->rows() != rows || relative->value->rows() != rows || relative->key->cols() != dh ||
        relative->value->cols() != dh) {
      throw DimensionError("attention: relative tables must be [2k+1, d_head]");
    }
  }
  check_layout(*layout, q->rows(), k->rows());

  const Scalar inv_scale = Scalar(1) / std::sqrt(Scalar(dh));
  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
  const auto& Q = q->value();
  const auto& K = k->value();
  const auto& V = v->value();
  Matrix<Scalar> out = Matrix<Scalar>::Zero(q->rows(), d);
  std::vector<Matrix<Scalar>> probs;
  probs.reserve(layout->blocks.size() * static_cast<std::size_t>(n_heads));

  RowVector<Scalar> shifted(dh), acc(dh), term(dh);
  for (const auto& blk : layout->blocks) {
    const Mask* mask = blk.mask >= 0 ? &layout->masks[static_cast<std::size_t>(blk.mask)] : nullptr;
    const Index nq = blk.query_len;
    const Index nk = blk.key_len;
    for (int h = 0; h < n_heads; ++h) {
      const Index c0 = Index(h) * dh;
      Matrix<Scalar> p(nq, nk);
      RowVector<Scalar> scores(nk);
      for (Index i = 0; i < nq; ++i) {
        const auto qi = Q.row(blk.query_begin + i).segment(c0, dh);
        Scalar max = kNegInf;
        bool visible = false;
        for (Index j = 0; j < nk; ++j) {
          if (mask && (*mask)(i, j)) {
            scores(j) = kNegInf;
            continue;
          }
          visible = true;
          const auto kj = K.row(blk.key_begin + j).segment(c0, dh);
          if (use_rel) {
            shifted = kj + relative->key->value().row(relative_index(i, j, relative->max_distance));
            scores(j) = qi.dot(shifted) * inv_scale;
          } else {
            scores(j) = qi.dot(kj) * inv_scale;
          }
          max = std::max(max, scores(j));
        }
        if (!visible) {
          throw EmptyContextError("attention: query " + std::to_string(i) + " has every key masked (empty context)");
        }
        for (Index j = 0; j < nk; ++j) p(i, j) = std::exp(scores(j) - max);
        // Pair key m with key nk-1-m so the reduction is reversal-symmetric.
        Scalar denom = 0;
        for (Index m = 0; m < nk / 2; ++m) denom += p(i, m) + p(i, nk - 1 - m);
        if (nk % 2) denom += p(i, nk / 2);
        p.row(i) /= denom;

        auto value_term = [&](Index j, RowVector<Scalar>& dst) {
          const auto vj = V.row(blk.key_begin + j).segment(c0, dh);
          if (use_rel) {
            dst = (vj + relative->value->value().row(relative_index(i, j, relative->max_distance))) * p(i, j);
          } else {
            dst = vj * p(i, j);
          }
        };
        acc.setZero();
        RowVector<Scalar> other(dh);
        for (Index m = 0; m < nk / 2; ++m) {
          value_term(m, term);
          value_term(nk - 1 - m, other);
          acc += term + other;
        }
        if (nk % 2) {
          value_term(nk / 2, term);
          acc += term;
        }
        out.row(blk.query_begin + i).segment(c0, dh) = acc;
      }
      probs.push_back(std::move(p));
    }
  }

  const bool rel_grad = use_rel && (relative->key->requires_grad() || relative->value->requires_grad());
  auto result = make_var<Scalar>(q->shape(), std::move(out),
                                 q->requires_grad() || k->requires_grad() || v->requires_grad() || rel_grad);
  if (tape.recording() && result->requires_grad()) {
    RelativeTables<Scalar> rel = use_rel ? *relative : RelativeTables<Scalar>{};
    tape.push([q, k, v, layout, n_heads, use_rel, rel, dh, inv_scale, probs = std::move(probs),
               out = result.get()] {
      const auto& Q = q->value();
      const auto& K = k->value();
      const auto& V = v->value();
      const auto& dO = out->grad();
      Matrix<Scalar> dQ = Matrix<Scalar>::Zero(Q.rows(), Q.cols());
      Matrix<Scalar> dK = Matrix<Scalar>::Zero(K.rows(), K.cols());
      Matrix<Scalar> dV = Matrix<Scalar>::Zero(V.rows(), V.cols());
      Matrix<Scalar> dRk, dRv;
      if (use_rel) {
        dRk = Matrix<Scalar>::Zero(rel.key->rows(), dh);
        dRv = Matrix<Scalar>::Zero(rel.value->rows(), dh);
      }
      std::size_t slot = 0;
      RowVector<Scalar> kk(dh), vv(dh);
      for (const auto& blk : layout->blocks) {
        const Mask* mask = blk.mask >= 0 ? &layout->masks[static_cast<std::size_t>(blk.mask)] : nullptr;
        for (int h = 0; h < n_heads; ++h) {
          const Index c0 = Index(h) * dh;
          const Matrix<Scalar>& p = probs[slot++];
          for (Index i = 0; i < blk.query_len; ++i) {
            const Index qi = blk.query_begin + i;
            const auto g = dO.row(qi).segment(c0, dh);
            RowVector<Scalar> dA(blk.key_len);
            Scalar inner = 0;
            for (Index j = 0; j < blk.key_len; ++j) {
              if (mask && (*mask)(i, j)) {
                dA(j) = 0;
                continue;
              }
              const Index kj = blk.key_begin + j;
              const Index r = use_rel ? relative_index(i, j, rel.max_distance) : 0;
              vv = V.row(kj).segment(c0, dh);
              if (use_rel) vv += rel.value->value().row(r);
              dA(j) = g.dot(vv);
              inner += p(i, j) * dA(j);
              dV.row(kj).segment(c0, dh) += p(i, j) * g;
              if (use_rel) dRv.row(r) += p(i, j) * g;
            }
            for (Index j = 0; j < blk.key_len; ++j) {
              if (mask && (*mask)(i, j)) continue;
              const Scalar ds = p(i, j) * (dA(j) - inner) * inv_scale;
              if (ds == Scalar(0)) continue;
              const Index kj = blk.key_begin + j;
              const Index r = use_rel ? relative_index(i, j, rel.max_distance) : 0;
              kk = K.row(kj).segment(c0, dh);
              if (use_rel) kk += rel.key->value().row(r);
              dQ.row(qi).segment(c0, dh) += ds * kk;
              dK.row(kj).segment(c0, dh) += ds * Q.row(qi).segment(c0, dh);
              if (use_rel) dRk.row(r) += ds * Q.row(qi).segment(c0, dh);
            }
          }
        }
      }
      if (q->requires_grad()) q->grad() += dQ;
      if (k->requires_grad()) k->grad() += dK;
      if (v->requires_grad()) v->grad() += dV;
      if (use_rel && rel.key->requires_grad()) rel.key->grad() += dRk;
      if (use_rel && rel.value->requires_grad()) rel.value->grad() += dRv;
    });
  }
  return result;
}

template Var<float> attention<float>(Tape<float>&, const Var<float>&, const Var<float>&, const Var<float>&,
                                     std::shared_ptr<const AttentionLayout>, int, const RelativeTables<float>*);
template Var<double> attention<double>(Tape<double>&, const Var<double>&, const Var<double>&,
                                       const Var<double>&, std::shared_ptr<const AttentionLayout>, int,
                                       const RelativeTables<double>*);

}  // namespace diformer
