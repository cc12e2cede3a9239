#include <gtest/gtest.h>

#include <cmath>

#include "diformer/decoding/translate.hpp"
#include "diformer/error.hpp"
#include "diformer/training/objective.hpp"
#include "support/fixtures.hpp"

namespace diformer {
namespace {

using testing::random_sequence;
using testing::tiny_config;

constexpr auto R = Direction::R;
constexpr auto S = Direction::S;
constexpr auto L = Direction::L;

struct Fixture {
  Model<float> model;
  TokenSeq src;
  EncoderState<float> enc;

  explicit Fixture(std::uint64_t seed)
      : model(Model<float>::initialize(tiny_config(), seed)),
        src([&] {
          Rng rng(seed);
          return random_sequence(rng, 20, 3, 8);
        }()),
        enc(encode_source(model, src)) {}
};

NARState masked_state(int content) {
  NARState s;
  const auto n = static_cast<std::size_t>(content + 2);
  s.tokens.assign(n, kMask);
  s.tokens.front() = kBos;
  s.tokens.back() = kEos;
  s.masked.assign(n, true);
  s.masked.front() = s.masked.back() = false;
  s.confidences.assign(n, 0.0);
  s.confidences.front() = s.confidences.back() = 1.0;
  s.content_length = content;
  return s;
}

int count_masks(const TokenSeq& t) { return static_cast<int>(std::count(t.begin(), t.end(), kMask)); }

double log_prob(const Matrix<float>& logits, Index row, TokenId t) {
  const auto r = logits.row(row).cast<double>();
  const double m = r.maxCoeff();
  return r(t) - m - std::log((r.array() - m).exp().sum());
}

// Greedy decoding by repeated full forward passes over the growing prefix.
TokenSeq argmax_chain(const Fixture& f, Direction dir, int max_len) {
  TokenSeq seq{dir == R ? kBos : kEos};
  const TokenId stop = dir == R ? kEos : kBos;
  while (static_cast<int>(seq.size()) < max_len) {
    const auto n = static_cast<Index>(seq.size());
    DecoderExample ex{seq, DirectionSeq(seq.size(), dir), dir == R ? causal_mask(n) : anticausal_mask(n), 0};
    const auto logits = decoder_logits(f.model, f.enc, {ex});
    const Index row = dir == R ? n - 1 : 0;
    TokenId best = seq.size() == 1 ? kNumReserved : stop;
    for (TokenId t = kNumReserved; t < logits.cols(); ++t) {
      if (logits(row, t) > logits(row, best)) best = t;
    }
    if (dir == R) {
      seq.push_back(best);
    } else {
      seq.insert(seq.begin(), best);
    }
    if (best == stop) break;
  }
  return seq;
}

TEST(Remask, MatchesBruteForceFloor) {
  for (int n = 0; n <= 20; ++n) {
    for (int T = 1; T <= 10; ++T) {
      for (int t = 0; t <= T; ++t) {
        int m = 0;
        while ((m + 1) * T <= n * (T - t)) ++m;
        EXPECT_EQ(remask_count(n, t, T), m) << n << " " << t << " " << T;
      }
    }
  }
  EXPECT_EQ(remask_count(5, 1, 5), 4);
  EXPECT_EQ(remask_count(5, 5, 5), 0);
  EXPECT_THROW(remask_count(5, 6, 5), Error);
}

TEST(Remask, LowestConfidenceTiesLeftmost) {
  auto s = masked_state(4);
  s.confidences = {1.0, 0.5, 0.2, 0.5, 0.2, 1.0};
  EXPECT_EQ(lowest_confidence(s, 3), (std::vector<int>{1, 2, 4}));
  EXPECT_EQ(lowest_confidence(s, 0), (std::vector<int>{}));
  EXPECT_EQ(lowest_confidence(s, 9), (std::vector<int>{1, 2, 3, 4}));
}

TEST(EasyFirst, RanksByConfidence) {
  const std::vector<double> c{1.0, 0.3, 0.9, 0.3, 0.6, 1.0};
  EXPECT_EQ(easy_first_ranks(c), (std::vector<int>{-1, 2, 0, 3, 1, -1}));
}

TEST(EasyFirst, ContextSetsFollowRankRuleAndNest) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(3, 16);
    std::vector<double> c(static_cast<std::size_t>(n));
    for (auto& v : c) v = double(rng.below(4)) / 4.0;
    const auto rank = easy_first_ranks(c);
    const auto m = easy_first_mask(rank);
    std::vector<int> by_rank(static_cast<std::size_t>(n - 2));
    for (int i = 1; i + 1 < n; ++i) by_rank[static_cast<std::size_t>(rank[static_cast<std::size_t>(i)])] = i;
    for (int i = 1; i + 1 < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const bool interior = j > 0 && j + 1 < n;
        EXPECT_EQ(m(i, j), interior && rank[static_cast<std::size_t>(j)] >= rank[static_cast<std::size_t>(i)]);
      }
    }
    for (std::size_t r = 1; r < by_rank.size(); ++r) {
      const auto prev = m.row(by_rank[r - 1]), next = m.row(by_rank[r]);
      for (int j = 0; j < n; ++j) {
        if (!prev(j)) EXPECT_FALSE(next(j));
      }
      EXPECT_TRUE(prev(by_rank[r - 1]) && !next(by_rank[r - 1]));
    }
    for (int j = 0; j < n; ++j) {
      EXPECT_EQ(m(0, j), j > 0);
      EXPECT_EQ(m(n - 1, j), j < n - 1);
    }
  }
}

TEST(MaskPredict, MaskHidesMaskedSetAndSelf) {
  const std::vector<bool> masked{false, true, false, true, false};
  const auto m = mask_predict_mask(masked);
  for (int i = 1; i < 4; ++i) {
    for (int j = 0; j < 5; ++j) EXPECT_EQ(m(i, j), j == i || masked[static_cast<std::size_t>(j)]);
  }
  EXPECT_EQ(nar_directions(5), (DirectionSeq{R, S, S, S, L}));
}

TEST(Autoregressive, GreedyEqualsArgmaxChain) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Fixture f(seed);
    for (auto dir : {R, L}) {
      const auto beam = beam_ar(f.model, f.enc, 0, dir, 1, 12);
      ASSERT_EQ(beam.size(), 1u);
      EXPECT_EQ(beam[0].tokens, argmax_chain(f, dir, 12));
      if (beam[0].finished) {
        EXPECT_EQ(beam[0].tokens.front(), kBos);
        EXPECT_EQ(beam[0].tokens.back(), kEos);
      }
    }
  }
}

TEST(Autoregressive, BeamScoresMatchRescoring) {
  for (std::uint64_t seed : {4, 5}) {
    const Fixture f(seed);
    for (auto dir : {R, L}) {
      const auto beam = beam_ar(f.model, f.enc, 0, dir, 4, 10);
      ASSERT_FALSE(beam.empty());
      ASSERT_LE(beam.size(), 4u);
      for (std::size_t k = 0; k < beam.size(); ++k) {
        if (k) EXPECT_GE(beam[k - 1].score, beam[k].score);
        EXPECT_NEAR(beam[k].score, score_sequence(f.model, f.enc, 0, beam[k].tokens, dir), 1e-5);
      }
    }
  }
}

TEST(Autoregressive, ScoreMatchesManualLogProbs) {
  const Fixture f(6);
  const TokenSeq y{kBos, 7, 9, 11, kEos};
  const auto n = static_cast<Index>(y.size());
  const auto lr = decoder_logits(f.model, f.enc, {DecoderExample{y, DirectionSeq(y.size(), R), causal_mask(n), 0}});
  const auto rl =
      decoder_logits(f.model, f.enc, {DecoderExample{y, DirectionSeq(y.size(), L), anticausal_mask(n), 0}});
  double l2r = 0.0, r2l = 0.0;
  for (Index i = 0; i + 1 < n; ++i) l2r += log_prob(lr, i, y[static_cast<std::size_t>(i + 1)]);
  for (Index i = 1; i < n; ++i) r2l += log_prob(rl, i, y[static_cast<std::size_t>(i - 1)]);
  EXPECT_NEAR(score_sequence(f.model, f.enc, 0, y, R), l2r / 4, 1e-5);
  EXPECT_NEAR(score_sequence(f.model, f.enc, 0, y, L), r2l / 4, 1e-5);
}

TEST(Autoregressive, UnfinishedWhenMaxLenReached) {
  const Fixture f(7);
  const auto out = beam_ar(f.model, f.enc, 0, R, 2, 3);
  ASSERT_FALSE(out.empty());
  EXPECT_LE(out[0].tokens.size(), 3u);
  if (!out[0].finished) EXPECT_NE(out[0].tokens.back(), kEos);
}

TEST(Trace, AutoregressiveLayout) {
  // Tokens 5..9 stand for A..E.
  const std::vector<std::string> names{"A", "B", "C", "D", "E"};
  const auto vocab = Vocabulary::from_tokens(names);
  Hypothesis h;
  h.tokens = {kBos, 5, 6, 7, 8, 9, kEos};
  const auto l2r = ar_trace(h, R);
  ASSERT_EQ(l2r.steps.size(), 6u);
  EXPECT_EQ(format_tokens(l2r.steps[0].output, vocab), "A");
  EXPECT_EQ(format_tokens(l2r.steps[0].context, vocab), "[B]");
  EXPECT_EQ(format_tokens(l2r.steps[2].output, vocab), "A B C");
  EXPECT_EQ(format_tokens(l2r.steps[2].context, vocab), "[B] A B");
  EXPECT_EQ(format_tokens(l2r.steps[5].output, vocab), "A B C D E [E]");
  EXPECT_EQ(format_tokens(l2r.steps[5].context, vocab), "[B] A B C D E");
  EXPECT_EQ(format_directions(l2r.steps[5].directions), "R R R R R R");
  const auto r2l = ar_trace(h, L);
  EXPECT_EQ(format_tokens(r2l.steps[0].output, vocab), "E");
  EXPECT_EQ(format_tokens(r2l.steps[0].context, vocab), "[E]");
  EXPECT_EQ(format_tokens(r2l.steps[1].output, vocab), "D E");
  EXPECT_EQ(format_tokens(r2l.steps[1].context, vocab), "E [E]");
  EXPECT_EQ(format_tokens(r2l.steps[5].output, vocab), "[B] A B C D E");
  EXPECT_EQ(format_tokens(r2l.steps[5].context, vocab), "A B C D E [E]");
  EXPECT_EQ(format_directions(r2l.steps[3].directions), "L L L L");

  Trace t;
  t.notes.push_back("hello");
  t.steps.push_back(l2r.steps[1]);
  EXPECT_EQ(format_trace(t, vocab), "# hello\n2\tA B\t[B] A\tR R\n");
}

TEST(Trace, MaskPredictLayout) {
  const Fixture f(8);
  std::vector<Trace> traces;
  const auto hyps = mask_predict(f.model, f.enc, 0, {masked_state(5)}, 5, &traces);
  ASSERT_EQ(traces.size(), 1u);
  const auto& steps = traces[0].steps;
  ASSERT_EQ(steps.size(), 5u);
  for (int t = 1; t <= 5; ++t) {
    const auto& s = steps[static_cast<std::size_t>(t - 1)];
    EXPECT_EQ(count_masks(s.output), remask_count(5, t, 5));
    EXPECT_EQ(count_masks(s.context), t == 1 ? 5 : remask_count(5, t - 1, 5));
    if (t > 1) EXPECT_EQ(s.context, steps[static_cast<std::size_t>(t - 2)].output);
    EXPECT_EQ(s.directions, DirectionSeq(5, S));
    EXPECT_EQ(s.output.front(), kBos);
    EXPECT_EQ(s.output.back(), kEos);
    // Tokens visible in the context are carried over unchanged.
    for (std::size_t i = 0; i < s.context.size(); ++i) {
      if (s.context[i] != kMask && s.output[i] != kMask) EXPECT_EQ(s.context[i], s.output[i]);
    }
  }
  EXPECT_EQ(hyps[0].tokens, steps.back().output);
  EXPECT_EQ(hyps[0].origin, 5);
}

TEST(Trace, EasyFirstLayout) {
  const Fixture f(9);
  std::vector<Trace> traces;
  const auto hyps = easy_first(f.model, f.enc, 0, {masked_state(5)}, 3, false, &traces);
  const auto& steps = traces[0].steps;
  ASSERT_EQ(steps.size(), 3u);
  EXPECT_EQ(count_masks(steps[0].context), 5);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(count_masks(steps[t].output), 0);
    EXPECT_EQ(steps[t].directions, DirectionSeq(5, S));
    if (t) EXPECT_EQ(steps[t].context, steps[t - 1].output);
  }
  EXPECT_EQ(hyps[0].tokens, steps.back().output);
}

TEST(EasyFirst, SecondPassUsesEasierPositionsOnly) {
  const Fixture f(10);
  auto first = easy_first(f.model, f.enc, 0, {masked_state(6)}, 1);
  auto two = easy_first(f.model, f.enc, 0, {masked_state(6)}, 2);
  // Oracle: one pass from iteration-1 output, each row hiding harder ranks.
  auto s = masked_state(6);
  s.tokens = first[0].tokens;
  const auto rank = easy_first_ranks(first[0].confidences);
  const auto logits = decoder_logits(f.model, f.enc, {DecoderExample{s.tokens, nar_directions(8), easy_first_mask(rank), 0}});
  for (Index i = 1; i < 7; ++i) {
    TokenId best = kNumReserved;
    for (TokenId t = kNumReserved; t < logits.cols(); ++t) {
      if (logits(i, t) > logits(i, best)) best = t;
    }
    EXPECT_EQ(two[0].tokens[static_cast<std::size_t>(i)], best);
  }
  // The easiest position sees no interior token, so its prediction is stable.
  const auto easiest = static_cast<std::size_t>(std::find(rank.begin(), rank.end(), 0) - rank.begin());
  EXPECT_EQ(two[0].tokens[easiest], first[0].tokens[easiest]);
}

TEST(NarInit, OneStatePerLength) {
  const Fixture f(11);
  const auto states = nar_init(f.enc, 0, 3);
  const auto lengths = predict_length(f.enc, 0, 3);
  ASSERT_EQ(states.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(states[k].content_length, lengths[k].length);
    EXPECT_EQ(count_masks(states[k].tokens), lengths[k].length);
  }
}

TEST(Rerank, AveragesBothDirections) {
  const Fixture f(12);
  std::vector<Hypothesis> cands(3);
  cands[0].tokens = {kBos, 6, 7, kEos};
  cands[1].tokens = {kBos, 8, kEos};
  cands[2].tokens = {kBos, 9, 10, 11, kEos};
  score_both_directions(f.model, f.enc, 0, cands);
  std::size_t best = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double l = score_sequence(f.model, f.enc, 0, cands[k].tokens, R);
    const double r = score_sequence(f.model, f.enc, 0, cands[k].tokens, L);
    EXPECT_NEAR(*cands[k].score_l2r, l, 1e-5);
    EXPECT_NEAR(*cands[k].score_r2l, r, 1e-5);
    EXPECT_DOUBLE_EQ(cands[k].score, (*cands[k].score_l2r + *cands[k].score_r2l) / 2);
    if (cands[k].score > cands[best].score) best = k;
  }
  EXPECT_EQ(self_rerank(f.model, f.enc, 0, cands), best);

  std::vector<Hypothesis> one(1);
  one[0].tokens = {kBos, 6, kEos};
  EXPECT_EQ(self_rerank(f.model, f.enc, 0, one), 0u);
  EXPECT_FALSE(one[0].score_l2r.has_value());
}

TEST(Rerank, BestByScoreTiesToFirst) {
  std::vector<Hypothesis> c(3);
  c[0].score = -1.0;
  c[1].score = -0.5;
  c[2].score = -0.5;
  EXPECT_EQ(best_by_score(c), 1u);
}

TEST(Translate, IterationBudgetWithRerank) {
  DecodeConfig cfg;
  cfg.mode = DecodeMode::MaskPredict;
  cfg.self_rerank = true;
  EXPECT_EQ(cfg.refinement_iterations(), 8);
  EXPECT_EQ(cfg.scoring_passes(), 2);
  cfg.self_rerank = false;
  EXPECT_EQ(cfg.refinement_iterations(), 10);
  EXPECT_EQ(parse_decode_mode("easy-first"), DecodeMode::EasyFirst);
  EXPECT_EQ(decode_mode_name(DecodeMode::R2L), "r2l");
  EXPECT_THROW(parse_decode_mode("sideways"), ConfigError);

  const Fixture f(13);
  cfg.self_rerank = true;
  cfg.length_beam = 3;
  const auto out = translate(f.model, f.src, cfg, true);
  EXPECT_EQ(out.trace.steps.size(), 8u);
  // Lengths that do not fit within max_len are skipped.
  EXPECT_GE(out.candidates.size(), 1u);
  EXPECT_LE(out.candidates.size(), 3u);
  bool budget = false;
  for (const auto& n : out.trace.notes) budget |= n.find("refinement_iterations=8 scoring_passes=2") != std::string::npos;
  EXPECT_TRUE(budget);
  for (const auto& c : out.candidates) EXPECT_TRUE(c.score_l2r && c.score_r2l);
}

TEST(Translate, AllModesDeterministic) {
  const Fixture f(14);
  for (auto mode : {DecodeMode::L2R, DecodeMode::R2L, DecodeMode::MaskPredict, DecodeMode::EasyFirst}) {
    DecodeConfig cfg;
    cfg.mode = mode;
    cfg.max_len = 12;
    const auto a = translate(f.model, f.src, cfg, true);
    const auto b = translate(f.model, f.src, cfg, true);
    EXPECT_EQ(a.best.tokens, b.best.tokens);
    EXPECT_FALSE(a.trace.steps.empty());
    if (a.best.finished) {
      EXPECT_EQ(a.best.tokens.front(), kBos);
      EXPECT_EQ(a.best.tokens.back(), kEos);
    }
    for (auto t : a.best.tokens) EXPECT_NE(t, kMask);
  }
  DecodeConfig bad;
  bad.ar_beam = 0;
  EXPECT_THROW(translate(f.model, f.src, bad), ConfigError);
}

}  // namespace
}  // namespace diformer
