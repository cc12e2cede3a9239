#include "diformer/cli/commands.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "diformer/cli/checkpoint.hpp"
#include "diformer/corpus/parallel_io.hpp"
#include "diformer/corpus/tasks.hpp"
#include "diformer/evalx/bleu.hpp"
#include "diformer/training/distill.hpp"
#include "diformer/training/trainer.hpp"

namespace diformer {

namespace fs = std::filesystem;

namespace {

struct MakeDataArgs {
  std::string task = "lexmap";
  int size = 10000;
  int test_size = -1;
  std::uint64_t seed = 1;
  std::string out;
  int vocab_size = 50;
  int min_len = 5;
  int max_len = 15;
  double swap_prob = 0.3;
  double noise = 0.0;
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::int64_t steps = -1;
  std::string log;
};

struct DistillArgs {
  std::string teacher;
  std::string data;
  std::string out;
  int beam = 4;
};

struct TranslateArgs {
  std::string ckpt;
  std::string mode = "l2r";
  std::string input;
  std::string output;
  int beam = 4;
  int length_beam = 5;
  int iterations = 10;
  bool self_rerank = false;
  std::string trace;
};

struct ScoreArgs {
  std::string ckpt;
  std::string mode = "l2r";
  std::string src;
  std::string tgt;
};

struct BleuArgs {
  std::string hyp;
  std::string ref;
};

void write_split(const fs::path& dir, const std::string& name, const std::vector<ParallelPair>& pairs,
                 const Vocabulary& vocab) {
  write_parallel_file(dir / name, pairs, vocab);
}

int make_data(const MakeDataArgs& a, std::ostream& out) {
  TaskConfig tc;
  tc.mode = parse_task_mode(a.task);
  tc.vocab_size = a.vocab_size;
  tc.min_len = a.min_len;
  tc.max_len = a.max_len;
  tc.swap_prob = a.swap_prob;
  tc.synonym_noise = a.noise;
  tc.seed = a.seed;
  const SyntheticTask task(tc);
  const int test_size = a.test_size >= 0 ? a.test_size : std::max(1, a.size / 10);
  Rng root(a.seed);
  Rng train_rng = root.stream("data.train");
  Rng test_rng = root.stream("data.test");
  const auto train = task.sample(a.size, train_rng, true);
  const auto test = task.sample(test_size, test_rng, false);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  task.vocabulary().save(dir / "vocab.txt");
  write_split(dir, "train", train, task.vocabulary());
  write_split(dir, "test", test, task.vocabulary());
  out << "wrote " << train.size() << " training and " << test.size() << " test pairs to " << dir.string() << '\n';
  return 0;
}

int train_command(const TrainArgs& a, std::ostream& out) {
  Config config = a.config.empty() ? Config{} : load_config(a.config);
  if (a.steps >= 0) config.training.steps = a.steps;
  const fs::path dir(a.data);
  const auto vocab = Vocabulary::load(dir / "vocab.txt");
  config.model.vocab_size = static_cast<int>(vocab.size());
  const auto data = load_parallel_file(dir / "train.src", dir / "train.tgt", vocab, config.model.max_len);
  auto model = Model<float>::initialize(config.model, config.training.seed);

  TrainOptions opts;
  opts.schedule = LRSchedule{config.training.lr, config.training.warmup};
  opts.steps = config.training.steps;
  opts.max_tokens = config.training.max_tokens;
  opts.seed = config.training.seed;
  opts.direction_mode = config.training.direction_mode;
  std::ofstream log_file;
  if (!a.log.empty()) {
    log_file.open(a.log);
    if (!log_file) throw DataError("cannot write " + a.log);
    opts.log = &log_file;
  } else {
    opts.log = &out;
  }
  const auto summary = train(model, data.pairs, opts);
  save_checkpoint(a.out, model, config, vocab);
  out << "# trained " << summary.steps << " steps; best epoch loss " << summary.best_loss << " at step "
      << summary.best_step << "; saved " << a.out << '\n';
  return 0;
}

int distill_command(const DistillArgs& a, std::ostream& out, std::ostream& err) {
  const auto ckpt = load_checkpoint(a.teacher);
  const fs::path in_dir(a.data), out_dir(a.out);
  const auto vocab = Vocabulary::load(in_dir / "vocab.txt");
  if (!(vocab == ckpt.vocab)) throw DataError("distill: data vocabulary differs from the teacher's");
  const auto data = load_parallel_file(in_dir / "train.src", in_dir / "train.tgt", vocab, ckpt.config.model.max_len);
  const auto distilled = distill_pairs(ckpt.model, data.pairs, a.beam, &err);
  fs::create_directories(out_dir);
  vocab.save(out_dir / "vocab.txt");
  write_split(out_dir, "train", distilled, vocab);
  if (fs::exists(in_dir / "test.src") && fs::exists(in_dir / "test.tgt")) {
    fs::copy_file(in_dir / "test.src", out_dir / "test.src", fs::copy_options::overwrite_existing);
    fs::copy_file(in_dir / "test.tgt", out_dir / "test.tgt", fs::copy_options::overwrite_existing);
  }
  out << "distilled " << distilled.size() << " pairs into " << out_dir.string() << '\n';
  return 0;
}

int translate_command(const TranslateArgs& a) {
  const auto ckpt = load_checkpoint(a.ckpt);
  DecodeConfig dc = ckpt.config.decode;
  dc.mode = parse_decode_mode(a.mode);
  dc.ar_beam = a.beam;
  dc.length_beam = a.length_beam;
  dc.iterations = a.iterations;
  dc.self_rerank = a.self_rerank;
  const auto lines = read_lines(a.input);
  std::vector<std::string> outputs;
  std::ofstream trace_file;
  if (!a.trace.empty()) {
    trace_file.open(a.trace);
    if (!trace_file) throw DataError("cannot write " + a.trace);
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto src = ckpt.vocab.encode(lines[i]);
    if (static_cast<int>(src.size()) > ckpt.config.model.max_len) {
      throw DataError("line " + std::to_string(i + 1) + " is longer than max_len");
    }
    const auto t = translate(ckpt.model, src, dc, !a.trace.empty());
    outputs.push_back(ckpt.vocab.decode(t.best.tokens));
    if (trace_file) trace_file << "# sentence " << i + 1 << '\n' << format_trace(t.trace, ckpt.vocab);
  }
  write_lines(a.output, outputs);
  return 0;
}

int score_command(const ScoreArgs& a, std::ostream& out) {
  const auto ckpt = load_checkpoint(a.ckpt);
  const auto mode = parse_decode_mode(a.mode);
  if (mode != DecodeMode::L2R && mode != DecodeMode::R2L) throw ConfigError("score: mode must be l2r or r2l");
  const Direction dir = mode == DecodeMode::L2R ? Direction::R : Direction::L;
  const auto src = read_lines(a.src);
  const auto tgt = read_lines(a.tgt);
  if (src.size() != tgt.size()) throw DataError("score: source and target line counts differ");
  double total = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto enc = encode_source(ckpt.model, ckpt.vocab.encode(src[i]));
    const double s = score_sequence(ckpt.model, enc, 0, ckpt.vocab.encode(tgt[i]), dir);
    total += s;
    out << std::setprecision(6) << s << '\n';
  }
  out << "# mean=" << std::setprecision(6) << (src.empty() ? 0.0 : total / double(src.size())) << '\n';
  return 0;
}

int bleu_command(const BleuArgs& a, std::ostream& out) {
  std::vector<Sentence> hyps, refs;
  for (const auto& l : read_lines(a.hyp)) hyps.push_back(split_tokens(l));
  for (const auto& l : read_lines(a.ref)) refs.push_back(split_tokens(l));
  out << corpus_bleu(std::span<const Sentence>(hyps), std::span<const Sentence>(refs)).to_string() << '\n';
  return 0;
}

}  // namespace

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Directional Transformer: training, decoding and evaluation on synthetic translation tasks",
               "diformer"};
  app.require_subcommand(1);
  app.get_formatter()->column_width(36);

  MakeDataArgs md;
  auto* c_make = app.add_subcommand("make-data", "Generate a synthetic parallel corpus");
  c_make->add_option("--task", md.task, "copy, reverse or lexmap")
      ->check(CLI::IsMember({"copy", "reverse", "lexmap"}))
      ->capture_default_str();
  c_make->add_option("--size", md.size, "Training pairs")->capture_default_str();
  c_make->add_option("--test-size", md.test_size, "Test pairs (default: size/10)");
  c_make->add_option("--seed", md.seed, "Random seed")->capture_default_str();
  c_make->add_option("--out", md.out, "Output directory")->required();
  c_make->add_option("--vocab-size", md.vocab_size, "Number of source words")->capture_default_str();
  c_make->add_option("--min-len", md.min_len, "Shortest content length")->capture_default_str();
  c_make->add_option("--max-len", md.max_len, "Longest content length")->capture_default_str();
  c_make->add_option("--swap-prob", md.swap_prob, "Lexmap adjacent swap rate")->capture_default_str();
  c_make->add_option("--noise", md.noise, "Lexmap synonym rate in training targets")->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model and write a checkpoint");
  c_train->add_option("--config", tr.config, "Config file (default: built-in desk settings)");
  c_train->add_option("--data", tr.data, "Directory with vocab.txt and train.src/.tgt")->required();
  c_train->add_option("--out", tr.out, "Checkpoint path")->required();
  c_train->add_option("--steps", tr.steps, "Override the configured step count");
  c_train->add_option("--log", tr.log, "Metrics file (default: stdout)");

  DistillArgs ds;
  auto* c_distill = app.add_subcommand("distill", "Replace training targets with teacher L2R beam outputs");
  c_distill->add_option("--teacher", ds.teacher, "Teacher checkpoint")->required();
  c_distill->add_option("--data", ds.data, "Input data directory")->required();
  c_distill->add_option("--out", ds.out, "Output data directory")->required();
  c_distill->add_option("--beam", ds.beam, "Beam size")->capture_default_str();

  TranslateArgs ts;
  auto* c_translate = app.add_subcommand("translate", "Decode a file of source sentences");
  c_translate->add_option("--ckpt", ts.ckpt, "Checkpoint")->required();
  c_translate->add_option("--mode", ts.mode, "l2r, r2l, mask-predict or easy-first")
      ->check(CLI::IsMember({"l2r", "r2l", "mask-predict", "easy-first"}))
      ->capture_default_str();
  c_translate->add_option("--input", ts.input, "Source sentences, one per line")->required();
  c_translate->add_option("--output", ts.output, "Output file")->required();
  c_translate->add_option("--beam", ts.beam, "AR beam size")->capture_default_str();
  c_translate->add_option("--length-beam", ts.length_beam, "NAR length candidates")->capture_default_str();
  c_translate->add_option("--iterations", ts.iterations, "NAR decoder pass budget")->capture_default_str();
  c_translate->add_flag("--self-rerank", ts.self_rerank, "Rescore candidates in both directions")
      ->capture_default_str();
  c_translate->add_option("--trace", ts.trace, "Write per-step traces to this file");

  ScoreArgs sc;
  auto* c_score = app.add_subcommand("score", "Mean token log-probability of target sentences");
  c_score->add_option("--ckpt", sc.ckpt, "Checkpoint")->required();
  c_score->add_option("--mode", sc.mode, "l2r or r2l")->check(CLI::IsMember({"l2r", "r2l"}))->capture_default_str();
  c_score->add_option("--src", sc.src, "Source sentences")->required();
  c_score->add_option("--tgt", sc.tgt, "Target sentences")->required();

  BleuArgs bl;
  auto* c_bleu = app.add_subcommand("bleu", "Corpus BLEU-4 of a hypothesis file");
  c_bleu->add_option("--hyp", bl.hyp, "Hypotheses")->required();
  c_bleu->add_option("--ref", bl.ref, "References")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (c_make->parsed()) return make_data(md, out);
    if (c_train->parsed()) return train_command(tr, out);
    if (c_distill->parsed()) return distill_command(ds, out, err);
    if (c_translate->parsed()) return translate_command(ts);
    if (c_score->parsed()) return score_command(sc, out);
    if (c_bleu->parsed()) return bleu_command(bl, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace diformer
