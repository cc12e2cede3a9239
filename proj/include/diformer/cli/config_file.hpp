#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "diformer/decoding/translate.hpp"
#include "diformer/model/config.hpp"
#include "diformer/training/objective.hpp"

namespace diformer {

struct TrainingConfig {
  double lr = 5e-4;
  int warmup = 400;
  std::int64_t steps = 4000;
  int max_tokens = 4096;
  std::uint64_t seed = 1;
  DirectionMode direction_mode = DirectionMode::Mixed;
  bool operator==(const TrainingConfig&) const = default;
};

/// Flat `key = value` configuration covering model, training and decoding.
///
/// Keys: preset (desk | paper-base, applied before every other key),
/// d_model, n_heads, d_ffn, enc_layers, dec_layers, max_len, k, lambda_len,
/// dropout, vocab_size, lr, warmup, steps, max_tokens, seed, direction_mode
/// (mixed | fixed-right), mode, ar_beam, length_beam, iterations,
/// self_rerank, early_stop, decode_max_len.
struct Config {
  std::string preset = "desk";
  ModelConfig model;
  TrainingConfig training;
  DecodeConfig decode;
  bool operator==(const Config&) const = default;
};

/// Blank lines and `#` comments are skipped. Unknown keys, malformed lines
/// and values of the wrong type raise ConfigError naming the key or line.
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

/// Every key, one per line, in a form parse_config reads back exactly.
std::string render_config(const Config& config);

}  // namespace diformer
