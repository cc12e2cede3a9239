#pragma once

namespace diformer {

/// Network hyperparameters.
struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_heads = 4;
  int d_ffn = 128;
  int enc_layers = 2;
  int dec_layers = 2;
  /// L_max: longest sequence, BOS and EOS included. Also the number of
  /// length classes (content lengths 1..max_len).
  int max_len = 64;
  /// k: relative distances are clipped to [-k, k].
  int max_rel = 16;
  /// Weight of the length loss.
  double lambda_len = 0.1;
  double dropout = 0.1;

  int d_head() const { return d_model / n_heads; }

  /// Throws ConfigError if the fields are inconsistent.
  void validate() const;

  /// Desk-scale defaults: 2+2 layers, d_model 64, 4 heads, FFN 128, k 16.
  static ModelConfig desk();
  /// Base-size settings: 6+6 layers, d_model 512, 8 heads, FFN 2048, k 256.
  static ModelConfig paper_base();

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace diformer
