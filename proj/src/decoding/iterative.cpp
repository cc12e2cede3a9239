#include "diformer/decoding/iterative.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "diformer/error.hpp"
#include "diformer/numcore/ops.hpp"

namespace diformer {

std::vector<NARState> nar_init(const EncoderState<float>& enc, std::size_t index, int length_beam) {
  if (length_beam < 1) throw Error("nar_init: length beam must be at least 1");
  const auto max_total = static_cast<int>(enc.length_logits->cols());
  std::vector<NARState> states;
  for (const auto& cand : predict_length(enc, index, length_beam)) {
    if (cand.length + 2 > max_total) continue;
    NARState s;
    const auto n = static_cast<std::size_t>(cand.length + 2);
    s.tokens.assign(n, kMask);
    s.tokens.front() = kBos;
    s.tokens.back() = kEos;
    s.masked.assign(n, true);
    s.masked.front() = s.masked.back() = false;
    s.confidences.assign(n, 0.0);
    s.confidences.front() = s.confidences.back() = 1.0;
    s.content_length = cand.length;
    s.length_log_prob = cand.log_prob;
    states.push_back(std::move(s));
  }
  if (states.empty()) throw Error("nar_init: no predicted length fits within max_len");
  return states;
}

int remask_count(int n_content, int t, int T) {
  if (T < 1 || t < 0 || t > T || n_content < 0) throw Error("remask_count: need 0 <= t <= T, T >= 1");
  return static_cast<int>((static_cast<long long>(n_content) * (T - t)) / T);
}

std::vector<int> lowest_confidence(const NARState& state, int count) {
  std::vector<int> interior;
  for (int i = 1; i + 1 < state.size(); ++i) interior.push_back(i);
  const auto c = static_cast<std::size_t>(std::clamp(count, 0, static_cast<int>(interior.size())));
  std::stable_sort(interior.begin(), interior.end(), [&](int a, int b) {
    return state.confidences[static_cast<std::size_t>(a)] < state.confidences[static_cast<std::size_t>(b)];
  });
  interior.resize(c);
  std::sort(interior.begin(), interior.end());
  return interior;
}

std::vector<int> easy_first_ranks(std::span<const double> confidences) {
  const int n = static_cast<int>(confidences.size());
  std::vector<int> order;
  for (int i = 1; i + 1 < n; ++i) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return confidences[static_cast<std::size_t>(a)] > confidences[static_cast<std::size_t>(b)];
  });
  std::vector<int> rank(static_cast<std::size_t>(n), -1);
  for (std::size_t r = 0; r < order.size(); ++r) rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
  return rank;
}

DirectionSeq nar_directions(int n) {
  if (n < 2) throw DimensionError("nar_directions: need at least BOS and EOS");
  DirectionSeq z(static_cast<std::size_t>(n), Direction::S);
  z.front() = Direction::R;
  z.back() = Direction::L;
  return z;
}

namespace {

void fill_end_rows(Mask& m) {
  const Index n = m.rows();
  for (Index j = 0; j < n; ++j) {
    m(0, j) = j > 0;
    m(n - 1, j) = j < n - 1;
  }
}

DecoderExample nar_example(const NARState& s, Mask mask, std::size_t index) {
  DecoderExample ex;
  ex.tokens = s.tokens;
  ex.directions = nar_directions(s.size());
  ex.key_mask = std::move(mask);
  ex.encoder_index = static_cast<int>(index);
  return ex;
}

struct Prediction {
  TokenId token = kUnk;
  double confidence = 0.0;
};

/// Best regular token at every row of the logits.
std::vector<Prediction> predict_rows(const Matrix<float>& logits) {
  std::vector<Prediction> out(static_cast<std::size_t>(logits.rows()));
  for (Index r = 0; r < logits.rows(); ++r) {
    const RowVector<float> logp = log_softmax<float>(logits.row(r));
    Index best = kNumReserved;
    for (Index t = kNumReserved + 1; t < logp.size(); ++t) {
      if (logp(t) > logp(best)) best = t;
    }
    out[static_cast<std::size_t>(r)] = Prediction{static_cast<TokenId>(best), std::exp(double(logp(best)))};
  }
  return out;
}

Hypothesis to_hypothesis(const NARState& s) {
  Hypothesis h;
  h.tokens = s.tokens;
  h.confidences = s.confidences;
  double sum = 0.0;
  for (int i = 1; i + 1 < s.size(); ++i) sum += s.confidences[static_cast<std::size_t>(i)];
  h.score = sum / double(std::max(1, s.size() - 2));
  h.origin = s.content_length;
  h.finished = true;
  return h;
}

TraceStep nar_step(int t, const TokenSeq& output, const TokenSeq& context) {
  TraceStep step;
  step.step = t;
  step.output = output;
  step.context = context;
  step.directions.assign(context.size() - 2, Direction::S);
  return step;
}

}  // namespace

Mask mask_predict_mask(const std::vector<bool>& masked) {
  const auto n = static_cast<Index>(masked.size());
  Mask m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = j == i || masked[static_cast<std::size_t>(j)];
  fill_end_rows(m);
  return m;
}

Mask easy_first_mask(const std::vector<int>& rank) {
  const auto n = static_cast<Index>(rank.size());
  Mask m(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const bool interior = j > 0 && j + 1 < n;
      m(i, j) = interior && rank[static_cast<std::size_t>(j)] >= rank[static_cast<std::size_t>(i)];
    }
  }
  fill_end_rows(m);
  return m;
}

std::vector<Hypothesis> mask_predict(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                                     std::vector<NARState> states, int T, std::vector<Trace>* traces) {
  if (T < 1) throw Error("mask_predict: need at least one iteration");
  if (traces) traces->assign(states.size(), Trace{});
  for (int t = 1; t <= T; ++t) {
    std::vector<DecoderExample> examples;
    for (const auto& s : states) examples.push_back(nar_example(s, mask_predict_mask(s.masked), index));
    const auto predictions = predict_rows(decoder_logits(model, enc, std::move(examples)));
    std::size_t row = 0;
    for (std::size_t k = 0; k < states.size(); ++k) {
      auto& s = states[k];
      const TokenSeq context = s.tokens;
      for (int i = 1; i + 1 < s.size(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        if (!s.masked[u]) continue;
        s.tokens[u] = predictions[row + u].token;
        s.confidences[u] = predictions[row + u].confidence;
        s.masked[u] = false;
      }
      row += static_cast<std::size_t>(s.size());
      for (int i : lowest_confidence(s, remask_count(s.content_length, t, T))) {
        const auto u = static_cast<std::size_t>(i);
        s.masked[u] = true;
        s.tokens[u] = kMask;
      }
      s.iteration = t;
      if (traces) (*traces)[k].steps.push_back(nar_step(t, s.tokens, context));
    }
  }
  std::vector<Hypothesis> out;
  for (const auto& s : states) out.push_back(to_hypothesis(s));
  return out;
}

std::vector<Hypothesis> easy_first(const Model<float>& model, const EncoderState<float>& enc, std::size_t index,
                                   std::vector<NARState> states, int T, bool early_stop, std::vector<Trace>* traces) {
  if (T < 1) throw Error("easy_first: need at least one iteration");
  if (traces) traces->assign(states.size(), Trace{});
  std::vector<bool> active(states.size(), true);
  for (int t = 1; t <= T; ++t) {
    std::vector<DecoderExample> examples;
    std::vector<std::size_t> members;
    for (std::size_t k = 0; k < states.size(); ++k) {
      if (!active[k]) continue;
      auto& s = states[k];
      if (t == 1) {
        std::vector<bool> all(static_cast<std::size_t>(s.size()), true);
        all.front() = all.back() = false;
        examples.push_back(nar_example(s, mask_predict_mask(all), index));
      } else {
        examples.push_back(nar_example(s, easy_first_mask(s.rank), index));
      }
      members.push_back(k);
    }
    if (members.empty()) break;
    const auto predictions = predict_rows(decoder_logits(model, enc, std::move(examples)));
    std::size_t row = 0;
    for (auto k : members) {
      auto& s = states[k];
      const TokenSeq context = s.tokens;
      bool changed = false;
      for (int i = 1; i + 1 < s.size(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        changed = changed || s.tokens[u] != predictions[row + u].token;
        s.tokens[u] = predictions[row + u].token;
        s.confidences[u] = predictions[row + u].confidence;
        s.masked[u] = false;
      }
      row += static_cast<std::size_t>(s.size());
      if (t == 1) s.rank = easy_first_ranks(s.confidences);
      s.iteration = t;
      if (traces) (*traces)[k].steps.push_back(nar_step(t, s.tokens, context));
      if (early_stop && t > 1 && !changed) active[k] = false;
    }
  }
  std::vector<Hypothesis> out;
  for (const auto& s : states) out.push_back(to_hypothesis(s));
  return out;
}

}  // namespace diformer
