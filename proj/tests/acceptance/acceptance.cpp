// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 1 4 9      run a subset

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "diformer/cli/checkpoint.hpp"
#include "diformer/decoding/autoregressive.hpp"
#include "diformer/decoding/rerank.hpp"
#include "diformer/decoding/translate.hpp"
#include "diformer/evalx/bleu.hpp"
#include "diformer/evalx/probes.hpp"
#include "diformer/numcore/attention.hpp"
#include "diformer/numcore/ops.hpp"
#include "diformer/training/distill.hpp"
#include "diformer/training/trainer.hpp"
#include "support/bleu_oracle.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

namespace diformer {
namespace {

// Tolerances.
constexpr double kOpGradTol = 1e-4;
constexpr double kModelGradTol = 1e-3;
constexpr double kReductionTol = 1e-5;
constexpr double kBleuTol = 1e-9;
constexpr double kArTarget = 0.95;
constexpr double kNarTarget = 0.90;

// Desk training recipe shared by the trained-model criteria.
constexpr int kTrainPairs = 10000;
constexpr int kTestPairs = 1000;
constexpr std::int64_t kSteps = 5000;
constexpr int kMaxTokens = 4096;
constexpr double kPeakLr = 2e-3;
constexpr int kWarmup = 200;
constexpr double kDropout = 0.0;
constexpr std::int64_t kDistillSteps = kSteps;
constexpr double kSynonymNoise = 0.1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------- 1

Outcome leakage() {
  auto cfg = ModelConfig::desk();
  cfg.vocab_size = 40;
  Rng rng(101);
  std::size_t violations = 0, examples = 0;
  for (int b = 0; b < 100; ++b) {
    const auto model = Model<float>::initialize(cfg, 1000 + static_cast<std::uint64_t>(b));
    const int count = rng.uniform_int(1, 4);
    const auto pairs = testing::random_pairs(rng, count, cfg.vocab_size, 1, 14);
    const auto batch = make_train_batch(std::span<const ParallelPair>(pairs), rng, DirectionMode::Mixed);
    violations += leakage_probe(model, batch, rng).size();
    examples += batch.size();
  }
  return {violations == 0, std::to_string(examples) + " examples in 100 batches, violations=" +
                               std::to_string(violations)};
}

// ---------------------------------------------------------------- 2

Var<double> random_var(Rng& rng, Shape shape) {
  Tensor<double> t(std::move(shape), true);
  for (Index i = 0; i < t.numel(); ++i) t.value().data()[i] = rng.uniform(-2.0, 2.0);
  return make_var(std::move(t));
}

Var<double> fixed_weights(Rng& rng, Shape shape) {
  auto w = random_var(rng, std::move(shape));
  w->set_requires_grad(false);
  return w;
}

Var<double> weighted(Tape<double>& t, const Var<double>& out, const Var<double>& w) { return sum(t, mul(t, out, w)); }

Outcome gradients() {
  using testing::grad_check;
  using Inputs = std::vector<std::pair<std::string, Var<double>>>;
  constexpr double step = 1e-3;
  Rng rng(202);
  std::map<std::string, double> ops;

  {
    auto a = random_var(rng, {2, 3, 4}), b = random_var(rng, {4, 5});
    auto w = fixed_weights(rng, {2, 3, 5});
    ops["matmul"] = testing::worst(
        grad_check(Inputs{{"a", a}, {"b", b}}, [&](Tape<double>& t) { return weighted(t, matmul(t, a, b), w); }, step));
  }
  {
    auto a = random_var(rng, {3, 4}), b = random_var(rng, {6, 4});
    auto w = fixed_weights(rng, {3, 6});
    ops["matmul_nt"] = testing::worst(grad_check(
        Inputs{{"a", a}, {"b", b}}, [&](Tape<double>& t) { return weighted(t, matmul_nt(t, a, b), w); }, step));
  }
  {
    auto a = random_var(rng, {3, 4}), b = random_var(rng, {3, 4}), bias = random_var(rng, {4});
    auto w = fixed_weights(rng, {3, 4});
    ops["add/scale/mul/bias/relu"] = testing::worst(grad_check(
        Inputs{{"a", a}, {"b", b}, {"bias", bias}},
        [&](Tape<double>& t) {
          auto x = mul(t, add(t, a, scale(t, b, 0.7)), b);
          return weighted(t, relu(t, add_bias(t, x, bias)), w);
        },
        step));
  }
  {
    auto a = random_var(rng, {4, 6});
    auto w = fixed_weights(rng, {4, 6});
    const Rng fixed(7);
    ops["dropout"] = testing::worst(grad_check(
        Inputs{{"a", a}},
        [&](Tape<double>& t) {
          Rng r = fixed;
          return weighted(t, dropout(t, a, 0.3, r), w);
        },
        step));
  }
  {
    auto x = random_var(rng, {3, 5}), g = random_var(rng, {5}), b = random_var(rng, {5});
    auto w = fixed_weights(rng, {3, 5});
    ops["layer_norm"] = testing::worst(grad_check(
        Inputs{{"x", x}, {"gain", g}, {"bias", b}},
        [&](Tape<double>& t) { return weighted(t, layer_norm(t, x, g, b), w); }, step));
  }
  {
    auto t0 = random_var(rng, {4, 3}), t1 = random_var(rng, {5, 3});
    const std::vector<RowRef> refs{{0, 1}, {1, 4}, {0, 1}, {1, 0}};
    const TokenSeq ids{2, 2, 0, 3, 1};
    auto w1 = fixed_weights(rng, {4, 3}), w2 = fixed_weights(rng, {5, 3});
    ops["gather_rows/embedding"] = testing::worst(grad_check(
        Inputs{{"t0", t0}, {"t1", t1}},
        [&](Tape<double>& t) {
          const Var<double> tables[] = {t0, t1};
          return add(t, weighted(t, gather_rows<double>(t, tables, refs), w1),
                     weighted(t, embedding<double>(t, t0, ids), w2));
        },
        step));
  }
  {
    auto x = random_var(rng, {3, 4});
    Mask m(3, 4);
    m << false, true, false, false, true, true, false, true, false, false, false, false;
    auto w = fixed_weights(rng, {3, 4});
    ops["masked_softmax"] = testing::worst(grad_check(
        Inputs{{"x", x}}, [&](Tape<double>& t) { return weighted(t, masked_softmax(t, x, m), w); }, step));
  }
  {
    auto x = random_var(rng, {4, 6});
    const TokenSeq targets{0, 5, kIgnore, 2};
    ops["cross_entropy"] = testing::worst(
        grad_check(Inputs{{"x", x}}, [&](Tape<double>& t) { return cross_entropy<double>(t, x, targets); }, step));
  }
  {
    auto x = random_var(rng, {7, 3});
    const std::vector<Index> offsets{0, 2}, lengths{2, 5};
    auto w = fixed_weights(rng, {2, 3});
    ops["segment_mean"] = testing::worst(grad_check(
        Inputs{{"x", x}},
        [&](Tape<double>& t) { return weighted(t, segment_mean<double>(t, x, offsets, lengths), w); }, step));
  }
  {
    auto layout = std::make_shared<AttentionLayout>();
    Mask m(4, 4);
    m << false, true, true, true, false, false, true, true, true, false, true, false, false, false, false, false;
    layout->masks.push_back(m);
    layout->blocks.push_back({0, 4, 0, 4, 0});
    layout->blocks.push_back({4, 3, 4, 3, -1});
    auto q = random_var(rng, {7, 4}), k = random_var(rng, {7, 4}), v = random_var(rng, {7, 4});
    auto rk = random_var(rng, {5, 2}), rv = random_var(rng, {5, 2});
    auto w = fixed_weights(rng, {7, 4});
    ops["attention"] = testing::worst(grad_check(
        Inputs{{"q", q}, {"k", k}, {"v", v}},
        [&](Tape<double>& t) { return weighted(t, attention(t, q, k, v, layout, 2), w); }, step));
    ops["attention/relative"] = testing::worst(grad_check(
        Inputs{{"q", q}, {"k", k}, {"v", v}, {"rel.key", rk}, {"rel.value", rv}},
        [&](Tape<double>& t) {
          const RelativeTables<double> rel{rk, rv, 2};
          return weighted(t, attention(t, q, k, v, layout, 2, &rel), w);
        },
        step));
  }

  double op_worst = 0.0;
  std::string op_name;
  for (const auto& [name, e] : ops) {
    if (e >= op_worst) op_worst = e, op_name = name;
  }

  auto cfg = testing::tiny_config(12, 8);
  cfg.lambda_len = 0.1;
  const auto model = Model<float>::initialize(cfg, 203).cast<double>();
  const auto pairs = testing::random_pairs(rng, 2, cfg.vocab_size, 2, 5);
  const auto batch = make_train_batch(std::span<const ParallelPair>(pairs), rng);
  Inputs params(model.params().begin(), model.params().end());
  const auto errors = grad_check(
      params,
      [&](Tape<double>& tape) {
        ForwardContext<double> ctx{tape};
        return dlm_loss(model, batch, ctx).total;
      },
      1e-5);
  double model_worst = 0.0;
  std::string model_name;
  for (const auto& e : errors) {
    if (e.rel_error >= model_worst) model_worst = e.rel_error, model_name = e.name;
  }
  return {op_worst < kOpGradTol && model_worst < kModelGradTol,
          std::to_string(ops.size()) + " ops worst " + fmt(op_worst) + " (" + op_name + ") < " + fmt(kOpGradTol) +
              "; " + std::to_string(errors.size()) + " parameters worst " + fmt(model_worst) + " (" + model_name +
              ") < " + fmt(kModelGradTol)};
}

// ---------------------------------------------------------------- 3

Outcome reduction() {
  auto cfg = ModelConfig::desk();
  cfg.vocab_size = 40;
  cfg.dropout = 0.0;
  Rng rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto model = Model<float>::initialize(cfg, 300 + static_cast<std::uint64_t>(trial));
    const auto pairs = testing::random_pairs(rng, 4, cfg.vocab_size, 1, 14);
    const auto batch = make_train_batch(std::span<const ParallelPair>(pairs), rng, DirectionMode::FixedRight);
    Tape<float> tape(false);
    ForwardContext<float> ctx{tape};
    const double dlm = dlm_loss(model, batch, ctx).dlm->item();

    // Teacher forcing: each sequence on its own, causal mask, predict y[i+1] from row i.
    double nll = 0.0;
    int count = 0;
    for (const auto& p : pairs) {
      const auto enc = encode_source(model, p.src);
      const auto n = static_cast<Index>(p.tgt.size());
      DecoderExample ex{p.tgt, DirectionSeq(p.tgt.size(), Direction::R), causal_mask(n), 0};
      const auto logits = decoder_logits(model, enc, {ex});
      for (Index i = 0; i + 1 < n; ++i) {
        const auto row = logits.row(i).cast<double>();
        const double m = row.maxCoeff();
        nll += m + std::log((row.array() - m).exp().sum()) - row(p.tgt[static_cast<std::size_t>(i + 1)]);
        ++count;
      }
    }
    worst = std::max(worst, std::abs(dlm - nll / count));
  }
  return {worst < kReductionTol, "10 batches, max |L_DLM - L2R CE| = " + fmt(worst) + " < " + fmt(kReductionTol)};
}

// ---------------------------------------------------------------- 4

Outcome mirror() {
  auto cfg = ModelConfig::desk();
  cfg.vocab_size = 40;
  Rng rng(404);
  int exact = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = Model<float>::initialize(cfg, 400 + static_cast<std::uint64_t>(trial));
    const auto flipped_model = mirror_model(model);
    const auto src = testing::random_sequence(rng, cfg.vocab_size, 1, 12);
    const auto y = testing::random_sequence(rng, cfg.vocab_size, 1, 14);
    const auto n = static_cast<Index>(y.size());
    DirectionSeq z(y.size());
    for (auto& d : z) d = rng.below(2) ? Direction::R : Direction::L;
    const DecoderExample ex{y, z, build_attention_mask(z, rng), 0};
    const auto base = decoder_logits(model, encode_source(model, src), {ex});
    const auto flipped = decoder_logits(flipped_model, encode_source(flipped_model, src), {mirror_example(ex)});
    bool same = true;
    for (Index i = 0; i < n; ++i) {
      same &= std::memcmp(base.row(i).eval().data(), flipped.row(n - 1 - i).eval().data(),
                          sizeof(float) * std::size_t(base.cols())) == 0;
    }
    exact += same;
  }
  return {exact == 20, std::to_string(exact) + "/20 models bitwise row-reversed"};
}

// ---------------------------------------------------------------- 5

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

int masks_in(const TokenSeq& t) { return static_cast<int>(std::count(t.begin(), t.end(), kMask)); }

Outcome mechanics() {
  int remask_bad = 0, remask_cases = 0;
  for (int n = 0; n <= 20; ++n) {
    for (int T = 1; T <= 10; ++T) {
      for (int t = 0; t <= T; ++t) {
        int m = 0;
        while ((m + 1) * T <= n * (T - t)) ++m;
        remask_bad += remask_count(n, t, T) != m;
        ++remask_cases;
      }
    }
  }

  Rng rng(505);
  int rank_bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(3, 22);
    std::vector<double> c(static_cast<std::size_t>(n));
    for (auto& v : c) v = double(rng.below(5)) / 5.0;
    const auto rank = easy_first_ranks(c);
    const auto m = easy_first_mask(rank);
    std::vector<int> by_rank(static_cast<std::size_t>(n - 2));
    for (int i = 1; i + 1 < n; ++i) by_rank[static_cast<std::size_t>(rank[static_cast<std::size_t>(i)])] = i;
    for (int i = 1; i + 1 < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const bool interior = j > 0 && j + 1 < n;
        rank_bad += m(i, j) != (interior && rank[static_cast<std::size_t>(j)] >= rank[static_cast<std::size_t>(i)]);
      }
    }
    for (std::size_t r = 1; r < by_rank.size(); ++r) {
      const auto prev = m.row(by_rank[r - 1]), next = m.row(by_rank[r]);
      for (int j = 0; j < n; ++j) rank_bad += !prev(j) && next(j);
      rank_bad += !(prev(by_rank[r - 1]) && !next(by_rank[r - 1]));
    }
  }

  // Five content tokens A..E (ids 5..9).
  const std::vector<std::string> names{"A", "B", "C", "D", "E"};
  const auto vocab = Vocabulary::from_tokens(names);
  auto rows = [&](const TraceStep& s) {
    return format_tokens(s.output, vocab) + " | " + format_tokens(s.context, vocab) + " | " +
           format_directions(s.directions);
  };
  int trace_bad = 0;
  Hypothesis h;
  h.tokens = {kBos, 5, 6, 7, 8, 9, kEos};
  const std::vector<std::string> l2r_rows{
      "A | [B] | R",           "A B | [B] A | R R",           "A B C | [B] A B | R R R",
      "A B C D | [B] A B C | R R R R", "A B C D E | [B] A B C D | R R R R R",
      "A B C D E [E] | [B] A B C D E | R R R R R R"};
  const std::vector<std::string> r2l_rows{
      "E | [E] | L",           "D E | E [E] | L L",           "C D E | D E [E] | L L L",
      "B C D E | C D E [E] | L L L L", "A B C D E | B C D E [E] | L L L L L",
      "[B] A B C D E | A B C D E [E] | L L L L L L"};
  const auto l2r = ar_trace(h, Direction::R), r2l = ar_trace(h, Direction::L);
  trace_bad += l2r.steps.size() != l2r_rows.size() || r2l.steps.size() != r2l_rows.size();
  for (std::size_t i = 0; i < std::min(l2r.steps.size(), l2r_rows.size()); ++i) trace_bad += rows(l2r.steps[i]) != l2r_rows[i];
  for (std::size_t i = 0; i < std::min(r2l.steps.size(), r2l_rows.size()); ++i) trace_bad += rows(r2l.steps[i]) != r2l_rows[i];

  const auto model = Model<float>::initialize(testing::tiny_config(), 506);
  const auto enc = encode_source(model, TokenSeq{kBos, 7, 8, 9, kEos});
  const DirectionSeq all_s(5, Direction::S);
  std::vector<Trace> mp;
  mask_predict(model, enc, 0, {masked_state(5)}, 5, &mp);
  const auto& ms = mp.at(0).steps;
  trace_bad += ms.size() != 5;
  for (std::size_t t = 0; t < ms.size(); ++t) {
    const int expect_out = 4 - static_cast<int>(t), expect_ctx = 5 - static_cast<int>(t);
    trace_bad += masks_in(ms[t].output) != expect_out || masks_in(ms[t].context) != expect_ctx;
    trace_bad += ms[t].directions != all_s || ms[t].output.front() != kBos || ms[t].output.back() != kEos;
    if (t) trace_bad += ms[t].context != ms[t - 1].output;
    for (std::size_t i = 0; i < ms[t].context.size(); ++i) {
      trace_bad += ms[t].context[i] != kMask && ms[t].context[i] != ms[t].output[i];
    }
  }
  std::vector<Trace> ef;
  easy_first(model, enc, 0, {masked_state(5)}, 3, false, &ef);
  const auto& es = ef.at(0).steps;
  trace_bad += es.size() != 3;
  for (std::size_t t = 0; t < es.size(); ++t) {
    trace_bad += masks_in(es[t].output) != 0 || es[t].directions != all_s;
    trace_bad += masks_in(es[t].context) != (t == 0 ? 5 : 0);
    if (t) trace_bad += es[t].context != es[t - 1].output;
  }

  return {remask_bad == 0 && rank_bad == 0 && trace_bad == 0,
          "(a) " + std::to_string(remask_cases) + " remask cases, " + std::to_string(remask_bad) +
              " wrong; (b) 200 rank sets, " + std::to_string(rank_bad) + " violations; (c) 4 modes, " +
              std::to_string(trace_bad) + " trace mismatches"};
}

// ---------------------------------------------------------------- 6-8

struct Lexmap {
  SyntheticTask task;
  std::vector<ParallelPair> train;
  std::vector<ParallelPair> test;
  std::vector<TokenSeq> test_sources;
  std::vector<TokenSeq> test_targets;

  explicit Lexmap(double noise) : task([&] {
    TaskConfig tc;
    tc.synonym_noise = noise;
    return tc;
  }()) {
    Rng root(1);
    Rng train_rng = root.stream("data.train"), test_rng = root.stream("data.test");
    train = task.sample(kTrainPairs, train_rng, true);
    test = task.sample(kTestPairs, test_rng, false);
    for (const auto& p : test) {
      test_sources.push_back(p.src);
      test_targets.push_back(p.tgt);
    }
  }
  ModelConfig model_config() const {
    auto cfg = ModelConfig::desk();
    cfg.vocab_size = static_cast<int>(task.vocabulary().size());
    cfg.dropout = kDropout;
    return cfg;
  }
};

Model<float> train_desk(const ModelConfig& cfg, std::span<const ParallelPair> pairs, std::int64_t steps,
                        std::uint64_t seed, const std::string& tag) {
  auto model = Model<float>::initialize(cfg, seed);
  TrainOptions opt;
  opt.schedule = LRSchedule{kPeakLr, kWarmup};
  opt.steps = steps;
  opt.max_tokens = kMaxTokens;
  opt.seed = seed;
  opt.on_step = [&](std::int64_t step, const StepResult& r) {
    if (step % 500 == 0) {
      std::cerr << "  [" << tag << "] step " << step << " dlm " << fmt(r.loss_dlm) << " len " << fmt(r.loss_len)
                << '\n';
    }
  };
  train(model, pairs, opt);
  return model;
}

double exact(const Model<float>& model, const Lexmap& data, const DecodeConfig& dc) {
  const auto hyps = translate_all(model, data.test_sources, dc);
  return exact_match(hyps, data.test_targets);
}

DecodeConfig decode_config(DecodeMode mode) {
  DecodeConfig dc;
  dc.mode = mode;
  dc.ar_beam = 1;
  dc.length_beam = 5;
  dc.iterations = 10;
  return dc;
}

const Lexmap& clean_data() {
  static const Lexmap data(0.0);
  return data;
}

const Model<float>& desk_model() {
  static const Model<float> model = [] {
    const auto& data = clean_data();
    return train_desk(data.model_config(), data.train, kSteps, 606, "lexmap");
  }();
  return model;
}

Outcome desk_training() {
  const auto start = std::chrono::steady_clock::now();
  const auto& model = desk_model();
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  const auto& data = clean_data();
  const double l2r = exact(model, data, decode_config(DecodeMode::L2R));
  const double r2l = exact(model, data, decode_config(DecodeMode::R2L));
  const double mp = exact(model, data, decode_config(DecodeMode::MaskPredict));
  const double ef = exact(model, data, decode_config(DecodeMode::EasyFirst));
  return {l2r >= kArTarget && r2l >= kArTarget && mp >= kNarTarget && ef >= kNarTarget,
          "exact match l2r=" + fmt(l2r) + " r2l=" + fmt(r2l) + " (>= " + fmt(kArTarget) + ") mask-predict=" +
              fmt(mp) + " easy-first=" + fmt(ef) + " (>= " + fmt(kNarTarget) + "); " + std::to_string(kSteps) +
              " steps in " + fmt(minutes, 3) + " min"};
}

TokenSeq corrupt(const TokenSeq& gold, Rng& rng, int vocab_size) {
  TokenSeq out = gold;
  const int n = static_cast<int>(gold.size()) - 2;
  switch (rng.below(3)) {
    case 0: {
      const int i = rng.uniform_int(1, n);
      TokenId t = out[static_cast<std::size_t>(i)];
      while (t == out[static_cast<std::size_t>(i)]) t = static_cast<TokenId>(rng.uniform_int(kNumReserved, vocab_size - 1));
      out[static_cast<std::size_t>(i)] = t;
      break;
    }
    case 1: {
      const int i = rng.uniform_int(1, n - 1);
      std::swap(out[static_cast<std::size_t>(i)], out[static_cast<std::size_t>(i + 1)]);
      if (out == gold) out.insert(out.begin() + i, out[static_cast<std::size_t>(i)]);
      break;
    }
    default:
      out.erase(out.begin() + rng.uniform_int(1, n));
      break;
  }
  return out;
}

Outcome self_reranking() {
  const auto& model = desk_model();
  const auto& data = clean_data();
  auto with = decode_config(DecodeMode::MaskPredict);
  with.self_rerank = true;
  const double reranked = exact(model, data, with);
  const double plain = exact(model, data, decode_config(DecodeMode::MaskPredict));

  // Oracle injection on a model overfit to 64 pairs.
  const std::vector<ParallelPair> few(data.train.begin(), data.train.begin() + 64);
  auto cfg = data.model_config();
  auto overfit = Model<float>::initialize(cfg, 607);
  TrainOptions opt;
  opt.schedule = LRSchedule{kPeakLr, 50};
  opt.steps = 600;
  opt.max_tokens = kMaxTokens;
  opt.seed = 607;
  train(overfit, few, opt);
  Rng rng(608);
  int picked = 0;
  for (const auto& p : few) {
    std::vector<Hypothesis> candidates;
    for (int c = 0; c < 4; ++c) {
      Hypothesis h;
      h.tokens = corrupt(p.tgt, rng, cfg.vocab_size);
      candidates.push_back(h);
    }
    const auto gold_at = static_cast<std::size_t>(rng.below(5));
    Hypothesis gold;
    gold.tokens = p.tgt;
    candidates.insert(candidates.begin() + static_cast<long>(gold_at), gold);
    const auto enc = encode_source(overfit, p.src);
    picked += self_rerank(overfit, enc, 0, candidates) == gold_at;
  }
  return {reranked >= plain && picked == 64,
          "mask-predict 8+rerank=" + fmt(reranked) + " >= 10 without=" + fmt(plain) + "; gold selected " +
              std::to_string(picked) + "/64"};
}

Outcome distillation() {
  static const Lexmap noisy(kSynonymNoise);
  const auto cfg = noisy.model_config();
  const auto teacher = train_desk(cfg, noisy.train, kDistillSteps, 701, "teacher");
  const auto distilled = distill_pairs(teacher, noisy.train, 4);
  const auto on_raw = train_desk(cfg, noisy.train, kDistillSteps, 702, "raw");
  const auto on_kd = train_desk(cfg, distilled, kDistillSteps, 702, "distilled");
  const auto dc = decode_config(DecodeMode::MaskPredict);
  const double raw = exact(on_raw, noisy, dc), kd = exact(on_kd, noisy, dc);
  return {kd >= raw, "mask-predict exact match distilled=" + fmt(kd) + " >= raw=" + fmt(raw) + " (" +
                         fmt(kSynonymNoise) + " synonym noise)"};
}

// ---------------------------------------------------------------- 9

Outcome bleu_and_checkpoint() {
  Rng rng(909);
  std::vector<Sentence> hyps, refs;
  for (int i = 0; i < 100; ++i) {
    for (auto* side : {&hyps, &refs}) {
      Sentence s;
      const int n = rng.uniform_int(0, 15);
      for (int k = 0; k < n; ++k) s.push_back("t" + std::to_string(rng.below(8)));
      side->push_back(s);
    }
  }
  const double diff = std::abs(corpus_bleu(hyps, refs).bleu - testing::brute_force_bleu(hyps, refs));

  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "diformer_acceptance";
  fs::create_directories(dir);
  Config config;
  config.model = ModelConfig::desk();
  const auto task = SyntheticTask(TaskConfig{});
  config.model.vocab_size = static_cast<int>(task.vocabulary().size());
  const auto model = Model<float>::initialize(config.model, 910);
  save_checkpoint(dir / "a.ckpt", model, config, task.vocabulary());
  const auto back = load_checkpoint(dir / "a.ckpt");
  bool same = back.config == config && back.vocab == task.vocabulary();
  for (const auto& [name, p] : model.params()) {
    const auto& q = back.model.param(name)->value();
    same &= p->value().size() == q.size() &&
            std::memcmp(p->value().data(), q.data(), sizeof(float) * std::size_t(q.size())) == 0;
  }
  save_checkpoint(dir / "b.ckpt", back.model, back.config, back.vocab);
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  same &= bytes(dir / "a.ckpt") == bytes(dir / "b.ckpt");
  fs::remove_all(dir);
  return {diff < kBleuTol && same, "100 pairs |bleu - brute force| = " + fmt(diff) + " < " + fmt(kBleuTol) +
                                       "; checkpoint round trip " + (same ? "bitwise" : "differs")};
}

}  // namespace
}  // namespace diformer

int main(int argc, char** argv) {
  using namespace diformer;
  CLI::App app{"Diformer acceptance suite"};
  std::vector<int> only;
  app.add_option("criteria", only, "Criterion numbers to run (default: all)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"leakage", leakage},
      {"gradients", gradients},
      {"fixed-right reduction", reduction},
      {"mirror equivariance", mirror},
      {"decoding mechanics", mechanics},
      {"desk training", desk_training},
      {"self-reranking", self_reranking},
      {"distillation", distillation},
      {"bleu and checkpoint", bleu_and_checkpoint},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    failed += !r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << ' ' << id << ' ' << criteria[i].first << ": " << r.detail << std::endl;
  }
  return failed ? 1 : 0;
}
