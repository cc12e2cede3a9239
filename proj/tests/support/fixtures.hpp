#pragma once

#include <vector>

#include "diformer/corpus/tasks.hpp"
#include "diformer/model/model.hpp"
#include "diformer/numcore/rng.hpp"

namespace diformer::testing {

/// Small network for invariant and gradient tests.
inline ModelConfig tiny_config(int vocab_size = 20, int d_model = 8) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.d_model = d_model;
  c.n_heads = 2;
  c.d_ffn = 2 * d_model;
  c.enc_layers = 2;
  c.dec_layers = 2;
  c.max_len = 24;
  c.max_rel = 4;
  c.dropout = 0.0;
  return c;
}

/// Random [BOS] w... [EOS] sequence with content length in [lo, hi].
inline TokenSeq random_sequence(Rng& rng, int vocab_size, int lo, int hi) {
  TokenSeq s{kBos};
  const int n = rng.uniform_int(lo, hi);
  for (int i = 0; i < n; ++i) s.push_back(static_cast<TokenId>(rng.uniform_int(kNumReserved, vocab_size - 1)));
  s.push_back(kEos);
  return s;
}

inline std::vector<ParallelPair> random_pairs(Rng& rng, int count, int vocab_size, int lo, int hi) {
  std::vector<ParallelPair> out;
  for (int i = 0; i < count; ++i) {
    out.push_back({random_sequence(rng, vocab_size, lo, hi), random_sequence(rng, vocab_size, lo, hi)});
  }
  return out;
}

}  // namespace diformer::testing
