#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rain {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data problems: bad JSONL, unknown ids, invariant violations in files.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class LabelError : public DataError {
 public:
  explicit LabelError(std::string value)
      : DataError("unknown label '" + value + "'"), value_(std::move(value)) {}
  const std::string& value() const noexcept { return value_; }

 private:
  std::string value_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Raised when an operation produces NaN or Inf; message names the op.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rain
