#include "diformer/model/config.hpp"

#include <string>

#include "diformer/error.hpp"

namespace diformer {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (d_model <= 0 || n_heads <= 0) fail("d_model and n_heads must be positive");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (d_ffn <= 0) fail("d_ffn must be positive");
  if (enc_layers < 1 || dec_layers < 1) fail("need at least one encoder and one decoder layer");
  if (max_len < 3) fail("max_len must be at least 3");
  if (max_rel < 1) fail("k (max_rel) must be at least 1");
  if (!(lambda_len >= 0.0 && lambda_len <= 1.0)) fail("lambda_len must lie in [0, 1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (vocab_size < 0) fail("vocab_size must be non-negative");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper_base() {
  ModelConfig c;
  c.d_model = 512;
  c.n_heads = 8;
  c.d_ffn = 2048;
  c.enc_layers = 6;
  c.dec_layers = 6;
  c.max_rel = 256;
  return c;
}

}  // namespace diformer
