#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xppm {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input document. Positions are 1-based; offset is a byte offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column,
             std::size_t offset);

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::size_t offset_;
};

// Invalid or inconsistent configuration (missing columns, bad ranges, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data that violates a precondition (dimension mismatch, degenerate
// labels, empty inputs, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage failed; wraps the underlying cause with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace xppm
