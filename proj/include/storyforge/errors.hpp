// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace storyforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree. The message names the offending operand.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A mask with no valid position was passed where at least one is required.
class InvalidMaskError : public Error {
 public:
  using Error::Error;
};

/// A function under evaluation produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// An optimizer received a NaN or infinite gradient.
class NonFiniteGradientError : public Error {
 public:
  explicit NonFiniteGradientError(const std::string& param)
      : Error("non-finite gradient for parameter '" + param + "'"), param_(param) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

/// Malformed input file. Line numbers are 1-based; 0 means "not line-oriented".
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Bad or unknown configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace storyforge
