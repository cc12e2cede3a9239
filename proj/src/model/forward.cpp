#include "diformer/model/forward.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "diformer/error.hpp"
#include "diformer/numcore/attention.hpp"
#include "diformer/numcore/ops.hpp"

namespace diformer {

namespace {

template <typename Scalar>
struct Layers {
  const Model<Scalar>& model;
  ForwardContext<Scalar>& ctx;

  const Var<Scalar>& p(const std::string& name) const { return model.param(name); }

  Var<Scalar> linear(const Var<Scalar>& x, const std::string& prefix) const {
    return add_bias(ctx.tape, matmul(ctx.tape, x, p(prefix + ".weight")), p(prefix + ".bias"));
  }

  Var<Scalar> norm(const Var<Scalar>& x, const std::string& prefix) const {
    return layer_norm(ctx.tape, x, p(prefix + ".gain"), p(prefix + ".bias"));
  }

  Var<Scalar> drop(const Var<Scalar>& x) const {
    if (!ctx.rng || ctx.dropout <= 0.0) return x;
    return dropout(ctx.tape, x, ctx.dropout, *ctx.rng);
  }

  Var<Scalar> residual(const Var<Scalar>& x, const Var<Scalar>& sub, const std::string& norm_prefix) const {
    return norm(add(ctx.tape, x, drop(sub)), norm_prefix);
  }

  Var<Scalar> ffn(const Var<Scalar>& x, const std::string& prefix) const {
    return linear(relu(ctx.tape, linear(x, prefix + ".in")), prefix + ".out");
  }

  Var<Scalar> word_embedding(std::span<const TokenId> ids) const {
    const Scalar scale_by = std::sqrt(Scalar(model.config().d_model));
    return scale(ctx.tape, embedding(ctx.tape, p("embed.word"), ids), scale_by);
  }
};

void check_ids(std::span<const TokenId> ids, int vocab, const char* where) {
  for (TokenId t : ids) {
    if (t < 0 || t >= vocab) {
      throw DimensionError(std::string(where) + ": token id " + std::to_string(t) + " outside vocabulary of " +
                           std::to_string(vocab));
    }
  }
}

}  // namespace

template <typename Scalar>
EncoderState<Scalar> encode(const Model<Scalar>& model, std::span<const TokenSeq> sources,
                            ForwardContext<Scalar>& ctx) {
  const auto& cfg = model.config();
  if (sources.empty()) throw DimensionError("encode: empty batch");
  EncoderState<Scalar> st;
  TokenSeq ids;
  std::vector<RowRef> positions;
  auto layout = std::make_shared<AttentionLayout>();
  for (const auto& src : sources) {
    const auto n = static_cast<Index>(src.size());
    if (n == 0) throw DimensionError("encode: empty source sequence");
    if (n > cfg.max_len) {
      throw DimensionError("encode: source length " + std::to_string(n) + " exceeds max_len " +
                           std::to_string(cfg.max_len));
    }
    const Index begin = static_cast<Index>(ids.size());
    st.offsets.push_back(begin);
    st.lengths.push_back(n);
    layout->blocks.push_back(AttentionBlock{begin, n, begin, n, -1});
    for (Index i = 0; i < n; ++i) positions.push_back(RowRef{0, i});
    ids.insert(ids.end(), src.begin(), src.end());
  }
  check_ids(ids, cfg.vocab_size, "encode");

  Layers<Scalar> L{model, ctx};
  auto& tape = ctx.tape;
  const Var<Scalar> pos_table[] = {L.p("encoder.position")};
  Var<Scalar> x = add(tape, L.word_embedding(ids), gather_rows<Scalar>(tape, pos_table, positions));
  x = L.drop(x);
  for (int l = 0; l < cfg.enc_layers; ++l) {
    const std::string pre = "encoder." + std::to_string(l);
    auto q = L.linear(x, pre + ".attn.q");
    auto k = L.linear(x, pre + ".attn.k");
    auto v = L.linear(x, pre + ".attn.v");
    auto a = attention(tape, q, k, v, layout, cfg.n_heads);
    x = L.residual(x, L.linear(a, pre + ".attn.o"), pre + ".norm1");
    x = L.residual(x, L.ffn(x, pre + ".ffn"), pre + ".norm2");
  }
  st.hidden = x;
  auto pooled = segment_mean<Scalar>(tape, x, st.offsets, st.lengths);
  st.length_logits = L.linear(relu(tape, L.linear(pooled, "length.hidden")), "length.out");
  return st;
}

template <typename Scalar>
EncoderState<Scalar> encode(const Model<Scalar>& model, const PaddedBatch& batch, ForwardContext<Scalar>& ctx) {
  std::vector<TokenSeq> sources;
  sources.reserve(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) sources.push_back(batch.src_row(r));
  return encode(model, std::span<const TokenSeq>(sources), ctx);
}

DirectedPosition directed_position_index(int i, int n, Direction z) {
  if (n < 1 || i < 1 || i > n) {
    throw DimensionError("directed_position_index: position " + std::to_string(i) + " outside 1.." +
                         std::to_string(n));
  }
  if (z == Direction::L) return DirectedPosition{true, n - i + 1};
  return DirectedPosition{false, i};
}

template <typename Scalar>
Var<Scalar> decoder_forward(const Model<Scalar>& model, const EncoderState<Scalar>& enc,
                            std::span<const DecoderExample> examples, ForwardContext<Scalar>& ctx) {
  const auto& cfg = model.config();
  if (examples.empty()) throw DimensionError("decoder_forward: empty batch");
  TokenSeq ids;
  std::vector<TokenId> direction_ids;
  std::vector<RowRef> positions;
  auto self_layout = std::make_shared<AttentionLayout>();
  auto cross_layout = std::make_shared<AttentionLayout>();
  for (const auto& ex : examples) {
    const auto n = static_cast<Index>(ex.tokens.size());
    if (n == 0) throw DimensionError("decoder_forward: empty target sequence");
    if (static_cast<Index>(ex.directions.size()) != n || ex.key_mask.rows() != n || ex.key_mask.cols() != n) {
      throw DimensionError("decoder_forward: tokens, directions and key mask disagree in length");
    }
    if (n > cfg.max_len) {
      throw DimensionError("decoder_forward: target length " + std::to_string(n) + " exceeds max_len " +
                           std::to_string(cfg.max_len));
    }
    if (ex.encoder_index < 0 || static_cast<std::size_t>(ex.encoder_index) >= enc.size()) {
      throw DimensionError("decoder_forward: encoder index out of range");
    }
    for (Index i = 0; i < n; ++i) {
      if (ex.key_mask.row(i).all()) {
        throw EmptyContextError("decoder_forward: query " + std::to_string(i) + " masks every key (empty context)");
      }
    }
    const Index begin = static_cast<Index>(ids.size());
    self_layout->masks.push_back(ex.key_mask);
    self_layout->blocks.push_back(
        AttentionBlock{begin, n, begin, n, static_cast<int>(self_layout->masks.size()) - 1});
    const auto e = static_cast<std::size_t>(ex.encoder_index);
    cross_layout->blocks.push_back(AttentionBlock{begin, n, enc.offsets[e], enc.lengths[e], -1});
    for (Index i = 0; i < n; ++i) {
      const Direction z = ex.directions[static_cast<std::size_t>(i)];
      const auto dp = directed_position_index(static_cast<int>(i + 1), static_cast<int>(n), z);
      positions.push_back(RowRef{dp.from_right ? 1 : 0, dp.index - 1});
      direction_ids.push_back(static_cast<TokenId>(z));
    }
    ids.insert(ids.end(), ex.tokens.begin(), ex.tokens.end());
  }
  check_ids(ids, cfg.vocab_size, "decoder_forward");

  Layers<Scalar> L{model, ctx};
  auto& tape = ctx.tape;
  const Var<Scalar> banks[] = {L.p("decoder.position.forward"), L.p("decoder.position.backward")};
  Var<Scalar> h = add(tape, gather_rows<Scalar>(tape, banks, positions),
                      embedding(tape, L.p("decoder.direction"), direction_ids));
  h = L.drop(h);
  const Var<Scalar> words = L.word_embedding(ids);
  const RelativeTables<Scalar> rel{L.p("decoder.relative.key"), L.p("decoder.relative.value"), cfg.max_rel};

  for (int l = 0; l < cfg.dec_layers; ++l) {
    const std::string pre = "decoder." + std::to_string(l);
    auto q = L.linear(h, pre + ".self.q");
    auto k = L.linear(words, pre + ".self.k");
    auto v = L.linear(words, pre + ".self.v");
    auto a = attention(tape, q, k, v, self_layout, cfg.n_heads, &rel);
    h = L.residual(h, L.linear(a, pre + ".self.o"), pre + ".norm1");

    auto cq = L.linear(h, pre + ".cross.q");
    auto ck = L.linear(enc.hidden, pre + ".cross.k");
    auto cv = L.linear(enc.hidden, pre + ".cross.v");
    auto c = attention(tape, cq, ck, cv, cross_layout, cfg.n_heads);
    h = L.residual(h, L.linear(c, pre + ".cross.o"), pre + ".norm2");

    h = L.residual(h, L.ffn(h, pre + ".ffn"), pre + ".norm3");
  }
  return matmul_nt(tape, h, L.p("embed.word"));
}

template <typename Scalar>
std::vector<LengthCandidate> predict_length(const EncoderState<Scalar>& enc, std::size_t index, int beam) {
  if (beam < 1) throw Error("predict_length: beam must be at least 1");
  if (index >= enc.size()) throw DimensionError("predict_length: index out of range");
  const RowVector<Scalar> logp = log_softmax<Scalar>(enc.length_logits->value().row(static_cast<Index>(index)));
  std::vector<LengthCandidate> all;
  all.reserve(static_cast<std::size_t>(logp.size()));
  for (Index c = 0; c < logp.size(); ++c) all.push_back(LengthCandidate{static_cast<int>(c + 1), double(logp(c))});
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(beam), all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<long>(keep), all.end(), [](const auto& a, const auto& b) {
    return a.log_prob != b.log_prob ? a.log_prob > b.log_prob : a.length < b.length;
  });
  all.resize(keep);
  return all;
}

#define DIFORMER_INSTANTIATE_FORWARD(S)                                                                   \
  template EncoderState<S> encode<S>(const Model<S>&, std::span<const TokenSeq>, ForwardContext<S>&);     \
  template EncoderState<S> encode<S>(const Model<S>&, const PaddedBatch&, ForwardContext<S>&);            \
  template Var<S> decoder_forward<S>(const Model<S>&, const EncoderState<S>&,                             \
                                     std::span<const DecoderExample>, ForwardContext<S>&);                \
  template std::vector<LengthCandidate> predict_length<S>(const EncoderState<S>&, std::size_t, int);

DIFORMER_INSTANTIATE_FORWARD(float)
DIFORMER_INSTANTIATE_FORWARD(double)

}  // namespace diformer
