#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace dpngan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An argument is outside its documented domain (negative stride, bad cutoff, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared in an operation result or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration field; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Non-fatal diagnostics go through a replaceable sink (stderr by default).
using WarningHandler = std::function<void(const std::string&)>;

inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return handler;
}

// Installs `handler` and returns the previous one.
inline WarningHandler set_warning_handler(WarningHandler handler) {
  return std::exchange(warning_handler(), std::move(handler));
}

inline void warn(const std::string& message) {
  if (warning_handler()) warning_handler()(message);
}

}  // namespace dpngan
