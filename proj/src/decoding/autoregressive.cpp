#include "diformer/decoding/autoregressive.hpp"

#include <algorithm>
#include <cmath>

#include "diformer/error.hpp"
#include "diformer/numcore/ops.hpp"
#include "diformer/training/objective.hpp"

namespace diformer {

Matrix<float> decoder_logits(const Model<float>& model, const EncoderState<float>& enc,
                             std::vector<DecoderExample> examples) {
  Tape<float> tape(false);
  ForwardContext<float> ctx{tape};
  auto logits = decoder_forward(model, enc, std::span<const DecoderExample>(examples), ctx);
  return std::move(logits->value());
}

EncoderState<float> encode_source(const Model<float>& model, const TokenSeq& src) {
  Tape<float> tape(false);
  ForwardContext<float> ctx{tape};
  return encode(model, std::span<const TokenSeq>(&src, 1), ctx);
}

namespace {

DecoderExample fixed_direction_example(TokenSeq tokens, Direction direction, std::size_t index) {
  const auto n = static_cast<Index>(tokens.size());
  DecoderExample ex;
  ex.tokens = std::move(tokens);
  ex.directions.assign(static_cast<std::size_t>(n), direction);
  ex.key_mask = direction == Direction::R ? causal_mask(n) : anticausal_mask(n);
  ex.encoder_index = static_cast<int>(index);
  return ex;
}

struct Partial {
  /// Generation order: starts with the given end token.
  TokenSeq buffer;
  std::vector<double> confidences;
  double sum = 0.0;
};

Hypothesis to_hypothesis(const Partial& p, Direction direction, int origin, bool finished) {
  Hypothesis h;
  h.tokens = p.buffer;
  h.confidences = p.confidences;
  if (direction == Direction::L) {
    std::reverse(h.tokens.begin(), h.tokens.end());
    std::reverse(h.confidences.begin(), h.confidences.end());
  }
  const double predicted = double(p.buffer.size() - 1);
  h.score = predicted > 0 ? p.sum / predicted : 0.0;
  (direction == Direction::R ? h.score_l2r : h.score_r2l) = h.score;
  h.origin = origin;
  h.finished = finished;
  return h;
}

}  // namespace

std::vector<Hypothesis> beam_ar(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                                Direction direction, int beam, int max_len) {
  if (beam < 1) throw Error("beam_ar: beam must be at least 1");
  if (direction == Direction::S) throw Error("beam_ar: direction must be R or L");
  if (max_len <= 0 || max_len > model.config().max_len) max_len = model.config().max_len;
  const TokenId start = direction == Direction::R ? kBos : kEos;
  const TokenId terminal = direction == Direction::R ? kEos : kBos;
  const auto vocab = static_cast<Index>(model.config().vocab_size);

  std::vector<Partial> live{Partial{{start}, {1.0}, 0.0}};
  std::vector<Partial> finished;
  while (!live.empty() && static_cast<int>(live.front().buffer.size()) < max_len) {
    std::vector<DecoderExample> examples;
    examples.reserve(live.size());
    for (const auto& p : live) {
      TokenSeq natural = p.buffer;
      if (direction == Direction::L) std::reverse(natural.begin(), natural.end());
      examples.push_back(fixed_direction_example(std::move(natural), direction, index));
    }
    const auto logits = decoder_logits(model, enc, std::move(examples));

    struct Candidate {
      std::size_t parent;
      TokenId token;
      double logp;
      double sum;
    };
    std::vector<Candidate> candidates;
    Index row = 0;
    for (std::size_t h = 0; h < live.size(); ++h) {
      const auto len = static_cast<Index>(live[h].buffer.size());
      const Index pred_row = direction == Direction::R ? row + len - 1 : row;
      row += len;
      const RowVector<float> logp = log_softmax<float>(logits.row(pred_row));
      std::vector<TokenId> allowed;
      for (Index t = 0; t < vocab; ++t) {
        if (t >= kNumReserved || (t == terminal && len > 1)) allowed.push_back(static_cast<TokenId>(t));
      }
      const auto keep = std::min<std::size_t>(static_cast<std::size_t>(beam), allowed.size());
      std::partial_sort(allowed.begin(), allowed.begin() + static_cast<long>(keep), allowed.end(),
                        [&](TokenId a, TokenId b) { return logp(a) != logp(b) ? logp(a) > logp(b) : a < b; });
      for (std::size_t k = 0; k < keep; ++k) {
        const double lp = double(logp(allowed[k]));
        candidates.push_back(Candidate{h, allowed[k], lp, live[h].sum + lp});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.sum > b.sum; });

    std::vector<Partial> next;
    for (std::size_t c = 0; c < candidates.size() && c < static_cast<std::size_t>(beam); ++c) {
      const auto& cand = candidates[c];
      Partial p = live[cand.parent];
      p.buffer.push_back(cand.token);
      p.confidences.push_back(std::exp(cand.logp));
      p.sum = cand.sum;
      (cand.token == terminal ? finished : next).push_back(std::move(p));
    }
    live = std::move(next);
    if (finished.size() >= static_cast<std::size_t>(beam)) break;
  }

  std::vector<Hypothesis> out;
  if (finished.empty()) {
    if (live.empty()) throw Error("beam_ar: no hypothesis survived");
    out.push_back(to_hypothesis(live.front(), direction, 0, false));
    return out;
  }
  for (std::size_t i = 0; i < finished.size(); ++i) {
    out.push_back(to_hypothesis(finished[i], direction, static_cast<int>(i), true));
  }
  std::stable_sort(out.begin(), out.end(), [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
  if (out.size() > static_cast<std::size_t>(beam)) out.resize(static_cast<std::size_t>(beam));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].origin = static_cast<int>(i);
  return out;
}

std::vector<double> score_sequences(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                                    std::span<const TokenSeq> sequences, Direction direction) {
  if (direction == Direction::S) throw Error("score_sequences: direction must be R or L");
  std::vector<DecoderExample> examples;
  for (const auto& s : sequences) {
    if (s.size() < 2) throw DimensionError("score_sequences: sequence needs at least BOS and EOS");
    if (static_cast<int>(s.size()) > model.config().max_len) {
      throw DimensionError("score_sequences: sequence of length " + std::to_string(s.size()) +
                           " exceeds max_len " + std::to_string(model.config().max_len));
    }
    examples.push_back(fixed_direction_example(s, direction, index));
  }
  if (examples.empty()) return {};
  const auto logits = decoder_logits(model, enc, std::move(examples));
  std::vector<double> out;
  Index row = 0;
  for (const auto& s : sequences) {
    const auto n = static_cast<Index>(s.size());
    double sum = 0.0;
    for (Index i = 0; i < n; ++i) {
      const Index target = direction == Direction::R ? i + 1 : i - 1;
      if (target < 0 || target >= n) continue;
      const RowVector<float> logp = log_softmax<float>(logits.row(row + i));
      sum += double(logp(s[static_cast<std::size_t>(target)]));
    }
    out.push_back(sum / double(n - 1));
    row += n;
  }
  return out;
}

double score_sequence(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                      const TokenSeq& sequence, Direction direction) {
  return score_sequences(model, enc, index, std::span<const TokenSeq>(&sequence, 1), direction).front();
}

Trace ar_trace(const Hypothesis& hyp, Direction direction) {
  Trace trace;
  const auto& y = hyp.tokens;
  const auto n = y.size();
  for (std::size_t s = 1; s < n; ++s) {
    TraceStep step;
    step.step = static_cast<int>(s);
    if (direction == Direction::R) {
      step.output.assign(y.begin() + 1, y.begin() + static_cast<long>(s) + 1);
      step.context.assign(y.begin(), y.begin() + static_cast<long>(s));
    } else {
      step.output.assign(y.end() - 1 - static_cast<long>(s), y.end() - 1);
      step.context.assign(y.end() - static_cast<long>(s), y.end());
    }
    step.directions.assign(s, direction);
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

}  // namespace diformer
