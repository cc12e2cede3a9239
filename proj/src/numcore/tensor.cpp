#include "diformer/numcore/tensor.hpp"

#include <sstream>

namespace diformer {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace diformer
