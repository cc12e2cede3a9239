#include "diformer/decoding/translate.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "diformer/error.hpp"

namespace diformer {

DecodeMode parse_decode_mode(const std::string& name) {
  if (name == "l2r") return DecodeMode::L2R;
  if (name == "r2l") return DecodeMode::R2L;
  if (name == "mask-predict") return DecodeMode::MaskPredict;
  if (name == "easy-first") return DecodeMode::EasyFirst;
  throw ConfigError("unknown decoding mode '" + name + "' (expected l2r, r2l, mask-predict or easy-first)");
}

std::string decode_mode_name(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::L2R: return "l2r";
    case DecodeMode::R2L: return "r2l";
    case DecodeMode::MaskPredict: return "mask-predict";
    case DecodeMode::EasyFirst: return "easy-first";
  }
  return "?";
}

int DecodeConfig::refinement_iterations() const {
  if (autoregressive()) return 0;
  return self_rerank ? std::max(1, iterations - 2) : iterations;
}

int DecodeConfig::scoring_passes() const { return self_rerank ? 2 : 0; }

namespace {

std::string format_score(const std::optional<double>& s) {
  if (!s) return "na";
  std::ostringstream os;
  os << std::setprecision(6) << *s;
  return os.str();
}

std::string candidate_note(std::size_t k, const Hypothesis& h, bool autoregressive) {
  std::ostringstream os;
  os << "candidate " << k << (autoregressive ? " rank=" : " length=") << h.origin << " score=" << std::setprecision(6)
     << h.score << " l2r=" << format_score(h.score_l2r) << " r2l=" << format_score(h.score_r2l);
  return os.str();
}

}  // namespace

Translation translate(const Model<float>& model, const TokenSeq& src, const DecodeConfig& config, bool with_trace) {
  if (config.ar_beam < 1 || config.length_beam < 1 || config.iterations < 1) {
    throw ConfigError("decoding: beams and iterations must be at least 1");
  }
  const auto enc = encode_source(model, src);
  Translation out;
  std::vector<Trace> traces;
  if (config.autoregressive()) {
    const Direction dir = config.mode == DecodeMode::L2R ? Direction::R : Direction::L;
    out.candidates = beam_ar(model, enc, 0, dir, config.ar_beam, config.max_len);
  } else {
    auto states = nar_init(enc, 0, config.length_beam);
    const int T = config.refinement_iterations();
    out.candidates = config.mode == DecodeMode::MaskPredict
                         ? mask_predict(model, enc, 0, std::move(states), T, with_trace ? &traces : nullptr)
                         : easy_first(model, enc, 0, std::move(states), T, config.early_stop,
                                      with_trace ? &traces : nullptr);
  }
  const std::size_t best =
      config.self_rerank ? self_rerank(model, enc, 0, out.candidates) : best_by_score(out.candidates);
  out.best = out.candidates[best];

  if (with_trace) {
    const bool ar = config.autoregressive();
    if (ar) {
      out.trace = ar_trace(out.best, config.mode == DecodeMode::L2R ? Direction::R : Direction::L);
    } else {
      out.trace = std::move(traces[best]);
    }
    std::ostringstream budget;
    budget << "mode=" << decode_mode_name(config.mode) << " refinement_iterations=" << config.refinement_iterations()
           << " scoring_passes=" << config.scoring_passes() << " self_rerank=" << (config.self_rerank ? 1 : 0);
    out.trace.notes.push_back(budget.str());
    for (std::size_t k = 0; k < out.candidates.size(); ++k) {
      out.trace.notes.push_back(candidate_note(k, out.candidates[k], ar));
    }
    out.trace.notes.push_back("selected candidate " + std::to_string(best));
  }
  return out;
}

std::vector<TokenSeq> translate_all(const Model<float>& model, std::span<const TokenSeq> sources,
                                    const DecodeConfig& config) {
  std::vector<TokenSeq> out;
  out.reserve(sources.size());
  for (const auto& src : sources) out.push_back(translate(model, src, config).best.tokens);
  return out;
}

}  // namespace diformer
