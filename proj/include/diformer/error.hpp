#pragma once

#include <stdexcept>
#include <string>

namespace diformer {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A softmax row in which every entry is masked.
class EmptyContextError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf observed where finite values are required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace diformer
