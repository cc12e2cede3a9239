#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "diformer/numcore/tensor.hpp"

namespace diformer {

/// Named learnable tensors, ordered by name.
template <typename Scalar>
using ParameterMap = std::map<std::string, Var<Scalar>>;

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

template <typename Scalar>
struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  std::map<std::string, Matrix<Scalar>> first_moment;
  std::map<std::string, Matrix<Scalar>> second_moment;
};

/// One bias-corrected Adam update over every parameter that has a gradient,
/// then zeroes the gradients. A NaN/Inf gradient aborts the update before
/// any parameter is touched and the error names the offending tensors.
template <typename Scalar>
void adam_step(const ParameterMap<Scalar>& params, AdamState<Scalar>& state, double lr);

}  // namespace diformer
