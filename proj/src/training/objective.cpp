#include "diformer/training/objective.hpp"

#include <sstream>

#include "diformer/error.hpp"
#include "diformer/numcore/ops.hpp"

namespace diformer {

DirectionMode parse_direction_mode(const std::string& name) {
  if (name == "mixed") return DirectionMode::Mixed;
  if (name == "fixed-right") return DirectionMode::FixedRight;
  throw ConfigError("unknown direction mode '" + name + "' (expected mixed or fixed-right)");
}

std::string direction_mode_name(DirectionMode mode) {
  return mode == DirectionMode::Mixed ? "mixed" : "fixed-right";
}

DirectionSeq sample_directions(int n, Rng& rng) {
  if (n < 2) throw Error("sample_directions: need at least 2 positions, got " + std::to_string(n));
  DirectionSeq z(static_cast<std::size_t>(n));
  z.front() = Direction::R;
  z.back() = Direction::L;
  for (int i = 1; i + 1 < n; ++i) z[static_cast<std::size_t>(i)] = static_cast<Direction>(rng.below(3));
  return z;
}

DirectionSeq fixed_right_directions(int n) {
  if (n < 2) throw Error("fixed_right_directions: need at least 2 positions");
  return DirectionSeq(static_cast<std::size_t>(n), Direction::R);
}

TokenSeq build_shifted_targets(const TokenSeq& y, const DirectionSeq& z) {
  if (y.size() != z.size()) throw DimensionError("build_shifted_targets: length mismatch");
  const std::size_t n = y.size();
  TokenSeq out(n, kIgnore);
  for (std::size_t i = 0; i < n; ++i) {
    switch (z[i]) {
      case Direction::R:
        if (i + 1 < n) out[i] = y[i + 1];
        break;
      case Direction::L:
        if (i > 0) out[i] = y[i - 1];
        break;
      case Direction::S:
        if (i == 0 || i + 1 == n) throw Error("build_shifted_targets: S tag at a sequence end");
        out[i] = y[i];
        break;
      default:
        throw Error("build_shifted_targets: malformed direction tag");
    }
  }
  return out;
}

Mask causal_mask(Index n) {
  Mask m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = j > i;
  return m;
}

Mask anticausal_mask(Index n) {
  Mask m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = j < i;
  return m;
}

Mask build_attention_mask(const DirectionSeq& z, Rng& rng) {
  const auto n = static_cast<Index>(z.size());
  Mask m = Mask::Constant(n, n, false);
  std::vector<bool> hidden(static_cast<std::size_t>(n), false);
  bool has_s = false;
  for (auto t : z) has_s = has_s || t == Direction::S;
  if (has_s && n >= 3) {
    std::vector<Index> interior;
    for (Index j = 1; j + 1 < n; ++j) interior.push_back(j);
    rng.shuffle(interior);
    const auto count = static_cast<std::size_t>(rng.uniform_int(1, static_cast<int>(n - 2)));
    for (std::size_t c = 0; c < count; ++c) hidden[static_cast<std::size_t>(interior[c])] = true;
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      switch (z[static_cast<std::size_t>(i)]) {
        case Direction::R: m(i, j) = j > i; break;
        case Direction::L: m(i, j) = j < i; break;
        case Direction::S: m(i, j) = j == i || hidden[static_cast<std::size_t>(j)]; break;
      }
    }
  }
  return m;
}

std::string TrainBatch::dump() const {
  std::ostringstream os;
  for (std::size_t b = 0; b < examples.size(); ++b) {
    const auto& ex = examples[b];
    os << "example " << b << "\n  src:";
    for (auto t : sources[static_cast<std::size_t>(ex.encoder_index)]) os << ' ' << t;
    os << "\n  tgt:";
    for (auto t : ex.tokens) os << ' ' << t;
    os << "\n  dir: ";
    for (auto z : ex.directions) os << direction_char(z);
    os << '\n';
  }
  return os.str();
}

namespace {

void append_example(TrainBatch& out, TokenSeq src, const TokenSeq& tgt, Rng& rng, DirectionMode mode) {
  const int n = static_cast<int>(tgt.size());
  if (n < 3) throw DataError("training target needs BOS, EOS and at least one content token");
  DecoderExample ex;
  ex.tokens = tgt;
  ex.directions = mode == DirectionMode::Mixed ? sample_directions(n, rng) : fixed_right_directions(n);
  ex.key_mask = mode == DirectionMode::Mixed ? build_attention_mask(ex.directions, rng) : causal_mask(n);
  ex.encoder_index = static_cast<int>(out.sources.size());
  const auto shifted = build_shifted_targets(tgt, ex.directions);
  out.targets.insert(out.targets.end(), shifted.begin(), shifted.end());
  out.length_targets.push_back(n - 3);
  out.sources.push_back(std::move(src));
  out.examples.push_back(std::move(ex));
}

}  // namespace

TrainBatch make_train_batch(const PaddedBatch& batch, Rng& rng, DirectionMode mode) {
  TrainBatch out;
  for (std::size_t r = 0; r < batch.size(); ++r) append_example(out, batch.src_row(r), batch.tgt_row(r), rng, mode);
  return out;
}

TrainBatch make_train_batch(std::span<const ParallelPair> pairs, Rng& rng, DirectionMode mode) {
  TrainBatch out;
  for (const auto& p : pairs) append_example(out, p.src, p.tgt, rng, mode);
  return out;
}

template <typename Scalar>
LossParts<Scalar> dlm_loss(const Model<Scalar>& model, const TrainBatch& batch, ForwardContext<Scalar>& ctx) {
  const auto enc = encode(model, std::span<const TokenSeq>(batch.sources), ctx);
  const auto logits = decoder_forward(model, enc, std::span<const DecoderExample>(batch.examples), ctx);
  LossParts<Scalar> out;
  out.dlm = cross_entropy<Scalar>(ctx.tape, logits, batch.targets);
  out.length = cross_entropy<Scalar>(ctx.tape, enc.length_logits, batch.length_targets);
  const Scalar lambda = Scalar(model.config().lambda_len);
  out.total = lambda == Scalar(0) ? out.dlm : add(ctx.tape, out.dlm, scale(ctx.tape, out.length, lambda));
  return out;
}

template LossParts<float> dlm_loss<float>(const Model<float>&, const TrainBatch&, ForwardContext<float>&);
template LossParts<double> dlm_loss<double>(const Model<double>&, const TrainBatch&, ForwardContext<double>&);

}  // namespace diformer
