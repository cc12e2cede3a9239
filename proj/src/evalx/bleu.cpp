#include "diformer/evalx/bleu.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "diformer/error.hpp"

namespace diformer {

namespace {

template <typename T>
std::map<std::vector<T>, std::size_t> ngram_counts(const std::vector<T>& s, std::size_t n) {
  std::map<std::vector<T>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[std::vector<T>(s.begin() + long(i), s.begin() + long(i + n))];
  return counts;
}

template <typename T>
BleuReport bleu_impl(std::span<const std::vector<T>> hyps, std::span<const std::vector<T>> refs) {
  if (hyps.size() != refs.size()) throw Error("corpus_bleu: hypothesis and reference counts differ");
  if (hyps.empty()) throw Error("corpus_bleu: empty hypothesis set");
  double matches[4] = {0, 0, 0, 0};
  double totals[4] = {0, 0, 0, 0};
  BleuReport r;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    r.hyp_len += hyps[s].size();
    r.ref_len += refs[s].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto h = ngram_counts(hyps[s], n);
      const auto ref = ngram_counts(refs[s], n);
      for (const auto& [gram, count] : h) {
        totals[n - 1] += double(count);
        const auto it = ref.find(gram);
        if (it != ref.end()) matches[n - 1] += double(std::min(count, it->second));
      }
    }
  }
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    r.precisions[n] = matches[n] > 0 ? matches[n] / totals[n] : 1.0 / (totals[n] + 1.0);
    log_sum += std::log(r.precisions[n]);
  }
  if (r.hyp_len == 0) {
    r.brevity_penalty = 0.0;
  } else if (r.hyp_len < r.ref_len) {
    r.brevity_penalty = std::exp(1.0 - double(r.ref_len) / double(r.hyp_len));
  } else {
    r.brevity_penalty = 1.0;
  }
  r.bleu = r.brevity_penalty * std::exp(log_sum / 4.0);
  return r;
}

std::string trimmed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s = buf;
  while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

}  // namespace

std::string BleuReport::to_string() const {
  std::ostringstream os;
  os << "BLEU=" << trimmed(bleu);
  for (int n = 0; n < 4; ++n) os << " p" << n + 1 << '=' << trimmed(precisions[n]);
  os << " BP=" << trimmed(brevity_penalty) << " hyp_len=" << hyp_len << " ref_len=" << ref_len;
  return os.str();
}

BleuReport corpus_bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  return bleu_impl<std::string>(hyps, refs);
}

TokenSeq strip_frame(std::span<const TokenId> ids) {
  TokenSeq out;
  for (auto t : ids)
    if (t != kBos && t != kEos && t != kPad) out.push_back(t);
  return out;
}

BleuReport corpus_bleu(std::span<const TokenSeq> hyps, std::span<const TokenSeq> refs) {
  std::vector<TokenSeq> h, r;
  for (const auto& s : hyps) h.push_back(strip_frame(s));
  for (const auto& s : refs) r.push_back(strip_frame(s));
  return bleu_impl<TokenId>(std::span<const TokenSeq>(h), std::span<const TokenSeq>(r));
}

double exact_match(std::span<const TokenSeq> hyps, std::span<const TokenSeq> refs) {
  if (hyps.size() != refs.size()) throw Error("exact_match: hypothesis and reference counts differ");
  if (hyps.empty()) return 0.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) same += strip_frame(hyps[i]) == strip_frame(refs[i]);
  return double(same) / double(hyps.size());
}

}  // namespace diformer
