#include "diformer/evalx/probes.hpp"

#include <algorithm>

#include "diformer/decoding/autoregressive.hpp"

namespace diformer {

std::vector<LeakageViolation> leakage_probe(const Model<float>& model, const TrainBatch& batch, Rng& rng) {
  std::vector<LeakageViolation> out;
  Tape<float> tape(false);
  ForwardContext<float> ctx{tape};
  const auto enc = encode(model, std::span<const TokenSeq>(batch.sources), ctx);
  const auto regular = static_cast<std::uint64_t>(model.config().vocab_size - kNumReserved);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch.examples[b];
    const Index n = static_cast<Index>(ex.tokens.size());
    std::vector<DecoderExample> variants{ex};
    std::vector<Index> keys;
    for (Index j = 0; j < n; ++j) {
      if (!ex.key_mask.col(j).any()) continue;
      DecoderExample v = ex;
      const TokenId old = v.tokens[static_cast<std::size_t>(j)];
      TokenId fresh = old;
      while (fresh == old) fresh = static_cast<TokenId>(kNumReserved + rng.below(regular));
      v.tokens[static_cast<std::size_t>(j)] = fresh;
      variants.push_back(std::move(v));
      keys.push_back(j);
    }
    if (keys.empty()) continue;
    const auto logits = decoder_logits(model, enc, std::move(variants));
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const Index j = keys[k];
      const Index base = static_cast<Index>(k + 1) * n;
      for (Index i = 0; i < n; ++i) {
        if (!ex.key_mask(i, j)) continue;
        const auto a = logits.row(i);
        const auto c = logits.row(base + i);
        if (!std::equal(a.data(), a.data() + a.size(), c.data())) out.push_back(LeakageViolation{b, i, j});
      }
    }
  }
  return out;
}

template <typename Scalar>
Model<Scalar> mirror_model(const Model<Scalar>& model) {
  ParameterMap<Scalar> params;
  for (const auto& [name, p] : model.params()) params.emplace(name, make_var<Scalar>(p->shape(), p->value(), true));
  std::swap(params.at("decoder.position.forward"), params.at("decoder.position.backward"));
  auto& dir = params.at("decoder.direction")->value();
  dir.row(0).swap(dir.row(2));
  for (const char* name : {"decoder.relative.key", "decoder.relative.value"}) {
    auto& t = params.at(name)->value();
    t = t.colwise().reverse().eval();
  }
  return Model<Scalar>(model.config(), std::move(params));
}

DecoderExample mirror_example(const DecoderExample& example) {
  DecoderExample m;
  m.tokens.assign(example.tokens.rbegin(), example.tokens.rend());
  for (auto it = example.directions.rbegin(); it != example.directions.rend(); ++it) m.directions.push_back(mirrored(*it));
  m.key_mask = example.key_mask.reverse();
  m.encoder_index = example.encoder_index;
  return m;
}

template Model<float> mirror_model<float>(const Model<float>&);
template Model<double> mirror_model<double>(const Model<double>&);

}  // namespace diformer
