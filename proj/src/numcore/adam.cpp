#include "diformer/numcore/adam.hpp"

#include <cmath>
#include <sstream>

namespace diformer {

template <typename Scalar>
void adam_step(const ParameterMap<Scalar>& params, AdamState<Scalar>& state, double lr) {
  if (!(lr > 0.0)) throw Error("adam_step: learning rate must be positive");

  std::ostringstream bad;
  for (const auto& [name, p] : params) {
    if (p->has_grad() && !p->grad().allFinite()) {
      const Index nan = p->grad().array().isNaN().count();
      const Index inf = p->grad().size() - nan - p->grad().array().isFinite().count();
      bad << ' ' << name << " (nan=" << nan << ", inf=" << inf << ')';
    }
  }
  if (!bad.str().empty()) throw NonFiniteError("adam_step: non-finite gradients in" + bad.str());

  const auto& o = state.options;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(o.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, double(state.step));
  const Scalar step_size = Scalar(lr / bc1);
  const Scalar b1 = Scalar(o.beta1), b2 = Scalar(o.beta2);
  const Scalar inv_bc2 = Scalar(1.0 / bc2);
  const Scalar eps = Scalar(o.eps);

  for (const auto& [name, p] : params) {
    if (!p->has_grad()) continue;
    auto& g = p->grad();
    auto [m_it, m_new] = state.first_moment.try_emplace(name, Matrix<Scalar>::Zero(g.rows(), g.cols()));
    auto [v_it, v_new] = state.second_moment.try_emplace(name, Matrix<Scalar>::Zero(g.rows(), g.cols()));
    auto& m = m_it->second;
    auto& v = v_it->second;
    if (m.rows() != g.rows() || m.cols() != g.cols()) throw DimensionError("adam_step: moment shape drift for " + name);
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    p->value().array() -= step_size * m.array() / ((v.array() * inv_bc2).sqrt() + eps);
    g.setZero();
  }
}

template void adam_step<float>(const ParameterMap<float>&, AdamState<float>&, double);
template void adam_step<double>(const ParameterMap<double>&, AdamState<double>&, double);

}  // namespace diformer
