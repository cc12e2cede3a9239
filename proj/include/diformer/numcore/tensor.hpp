#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "diformer/error.hpp"

namespace diformer {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Boolean attention/key mask; true marks an entry that must be ignored.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_string(const Shape& shape);
Index shape_numel(const Shape& shape);

/// Dense row-major array of arbitrary rank.
///
/// Storage is a matrix whose column count is the last extent and whose row
/// count is the product of the leading extents, so rank-n tensors can be fed
/// directly to Eigen products. A rank-0 tensor is a 1x1 matrix.
template <typename Scalar>
class Tensor {
 public:
  Tensor() : Tensor(Shape{}) {}

  explicit Tensor(Shape shape, bool requires_grad = false)
      : shape_(std::move(shape)), requires_grad_(requires_grad) {
    value_ = Matrix<Scalar>::Zero(leading(shape_), trailing(shape_));
  }

  Tensor(Shape shape, Matrix<Scalar> value, bool requires_grad = false)
      : shape_(std::move(shape)), value_(std::move(value)), requires_grad_(requires_grad) {
    if (value_.rows() != leading(shape_) || value_.cols() != trailing(shape_)) {
      throw DimensionError("tensor data does not match shape " + shape_string(shape_));
    }
  }

  static Tensor scalar(Scalar v) {
    Tensor t;
    t.value_(0, 0) = v;
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index numel() const noexcept { return value_.size(); }
  Index rows() const noexcept { return value_.rows(); }
  Index cols() const noexcept { return value_.cols(); }

  Matrix<Scalar>& value() noexcept { return value_; }
  const Matrix<Scalar>& value() const noexcept { return value_; }
  Scalar item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape_));
    return value_(0, 0);
  }

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

  bool has_grad() const noexcept { return grad_.has_value(); }
  /// Gradient buffer, allocated as zeros on first access.
  Matrix<Scalar>& grad() {
    if (!grad_) grad_ = Matrix<Scalar>::Zero(value_.rows(), value_.cols());
    return *grad_;
  }
  const Matrix<Scalar>& grad() const {
    if (!grad_) throw Error("tensor has no gradient");
    return *grad_;
  }
  void zero_grad() {
    if (grad_) grad_->setZero();
  }
  void clear_grad() noexcept { grad_.reset(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, value_.template cast<Other>(), requires_grad_);
  }

 private:
  static Index leading(const Shape& s) {
    Index n = 1;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) n *= s[i];
    return n;
  }
  static Index trailing(const Shape& s) { return s.empty() ? 1 : s.back(); }

  Shape shape_;
  Matrix<Scalar> value_;
  std::optional<Matrix<Scalar>> grad_;
  bool requires_grad_ = false;
};

template <typename Scalar>
using Var = std::shared_ptr<Tensor<Scalar>>;

template <typename Scalar>
Var<Scalar> make_var(Tensor<Scalar> t) {
  return std::make_shared<Tensor<Scalar>>(std::move(t));
}

template <typename Scalar>
Var<Scalar> make_var(Shape shape, Matrix<Scalar> value, bool requires_grad = false) {
  return std::make_shared<Tensor<Scalar>>(std::move(shape), std::move(value), requires_grad);
}

/// Reverse-mode record of executed operations.
///
/// Each differentiable op appends one closure after its output is computed,
/// so the record is topologically ordered by construction. backward() runs
/// the closures once, newest first, and then empties the record. A tape built
/// with recording disabled ignores every push, which is how inference avoids
/// retaining intermediates.
template <typename Scalar>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// True when an op over these inputs has to record a backward step.
  template <typename... Vars>
  bool tracks(const Vars&... inputs) const {
    return recording_ && (inputs->requires_grad() || ...);
  }

  void push(std::function<void()> backward_step) { nodes_.push_back(std::move(backward_step)); }

  void backward(const Var<Scalar>& loss) {
    if (loss->numel() != 1 || loss->rank() != 0) {
      throw DimensionError("backward() needs a scalar loss, got shape " + shape_string(loss->shape()));
    }
    loss->grad().setConstant(Scalar(1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    nodes_.clear();
  }

 private:
  bool recording_;
  std::vector<std::function<void()>> nodes_;
};

}  // namespace diformer
