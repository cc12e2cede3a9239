#include "diformer/model/model.hpp"

#include <algorithm>
#include <cmath>

#include "diformer/error.hpp"
#include "diformer/numcore/rng.hpp"
#include "diformer/types.hpp"

namespace diformer {

namespace {

void add_linear(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix, Index in, Index outw) {
  out.emplace_back(prefix + ".weight", Shape{in, outw});
  out.emplace_back(prefix + ".bias", Shape{outw});
}

void add_norm(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix, Index d) {
  out.emplace_back(prefix + ".gain", Shape{d});
  out.emplace_back(prefix + ".bias", Shape{d});
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& c) {
  c.validate();
  if (c.vocab_size <= kNumReserved) throw ConfigError("model config: vocab_size must exceed the reserved ids");
  const Index d = c.d_model;
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("embed.word", Shape{c.vocab_size, d});
  out.emplace_back("encoder.position", Shape{c.max_len, d});
  for (int l = 0; l < c.enc_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    for (const char* n : {"q", "k", "v", "o"}) add_linear(out, p + ".attn." + n, d, d);
    add_norm(out, p + ".norm1", d);
    add_linear(out, p + ".ffn.in", d, c.d_ffn);
    add_linear(out, p + ".ffn.out", c.d_ffn, d);
    add_norm(out, p + ".norm2", d);
  }
  add_linear(out, "length.hidden", d, d);
  add_linear(out, "length.out", d, c.max_len);
  out.emplace_back("decoder.position.forward", Shape{c.max_len, d});
  out.emplace_back("decoder.position.backward", Shape{c.max_len, d});
  out.emplace_back("decoder.direction", Shape{3, d});
  out.emplace_back("decoder.relative.key", Shape{2 * Index(c.max_rel) + 1, c.d_head()});
  out.emplace_back("decoder.relative.value", Shape{2 * Index(c.max_rel) + 1, c.d_head()});
  for (int l = 0; l < c.dec_layers; ++l) {
    const std::string p = "decoder." + std::to_string(l);
    for (const char* n : {"q", "k", "v", "o"}) add_linear(out, p + ".self." + n, d, d);
    add_norm(out, p + ".norm1", d);
    for (const char* n : {"q", "k", "v", "o"}) add_linear(out, p + ".cross." + n, d, d);
    add_norm(out, p + ".norm2", d);
    add_linear(out, p + ".ffn.in", d, c.d_ffn);
    add_linear(out, p + ".ffn.out", c.d_ffn, d);
    add_norm(out, p + ".norm3", d);
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <typename Scalar>
Model<Scalar>::Model(ModelConfig config, ParameterMap<Scalar> params)
    : config_(std::move(config)), params_(std::move(params)) {
  const auto expected = parameter_shapes(config_);
  if (expected.size() != params_.size()) {
    throw ConfigError("model: expected " + std::to_string(expected.size()) + " parameters, got " +
                      std::to_string(params_.size()));
  }
  for (const auto& [name, shape] : expected) {
    const auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("model: missing parameter " + name);
    if (it->second->shape() != shape) {
      throw ConfigError("model: parameter " + name + " has shape " + shape_string(it->second->shape()) +
                        ", expected " + shape_string(shape));
    }
    it->second->set_requires_grad(true);
  }
}

template <typename Scalar>
Model<Scalar> Model<Scalar>::initialize(const ModelConfig& config, std::uint64_t seed) {
  Rng rng = Rng(seed).stream("init");
  const double embed_std = 1.0 / std::sqrt(double(config.d_model));
  ParameterMap<Scalar> params;
  for (const auto& [name, shape] : parameter_shapes(config)) {
    Tensor<Scalar> t(shape, true);
    auto& v = t.value();
    if (ends_with(name, ".gain")) {
      v.setOnes();
    } else if (ends_with(name, ".bias")) {
      v.setZero();
    } else if (ends_with(name, ".weight")) {
      const double a = std::sqrt(6.0 / double(shape[0] + shape[1]));
      for (Index i = 0; i < v.size(); ++i) v.data()[i] = Scalar(rng.uniform(-a, a));
    } else {
      const double sd = name == "embed.word" ? embed_std : 1.0;
      for (Index i = 0; i < v.size(); ++i) v.data()[i] = Scalar(rng.normal() * sd);
    }
    params.emplace(name, make_var(std::move(t)));
  }
  return Model(config, std::move(params));
}

template <typename Scalar>
const Var<Scalar>& Model<Scalar>::param(const std::string& name) const {
  const auto it = params_.find(name);
  if (it == params_.end()) throw Error("model: no parameter named " + name);
  return it->second;
}

template <typename Scalar>
Model<Scalar> Model<Scalar>::clone() const {
  ParameterMap<Scalar> out;
  for (const auto& [name, p] : params_) out.emplace(name, make_var<Scalar>(p->shape(), p->value(), true));
  return Model(config_, std::move(out));
}

template <typename Scalar>
void Model<Scalar>::zero_grad() {
  for (auto& [name, p] : params_) p->clear_grad();
}

template <typename Scalar>
std::size_t Model<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p->numel());
  return n;
}

template class Model<float>;
template class Model<double>;

}  // namespace diformer
