#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "diformer/model/config.hpp"
#include "diformer/numcore/adam.hpp"
#include "diformer/numcore/tensor.hpp"

namespace diformer {

/// Parameter names and shapes for a configuration, in name order.
///
/// Target word embeddings double as the output projection and the source
/// embeddings (one shared vocabulary). The decoder owns two position banks
/// (counting from the left and from the right), a 3-row direction table in
/// R, S, L order, and the relative tables shared by all heads and layers.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& config);

template <typename Scalar>
class Model {
 public:
  /// Validates that `params` holds exactly the expected names and shapes.
  Model(ModelConfig config, ParameterMap<Scalar> params);

  /// Xavier-uniform linear weights, N(0, 1/d_model) embeddings, unit norms.
  static Model initialize(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  const ParameterMap<Scalar>& params() const noexcept { return params_; }
  const Var<Scalar>& param(const std::string& name) const;

  /// Deep copy, gradients dropped.
  Model clone() const;

  template <typename Other>
  Model<Other> cast() const {
    ParameterMap<Other> out;
    for (const auto& [name, p] : params_) out.emplace(name, make_var(p->template cast<Other>()));
    return Model<Other>(config_, std::move(out));
  }

  void zero_grad();
  std::size_t parameter_count() const;

 private:
  ModelConfig config_;
  ParameterMap<Scalar> params_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace diformer
