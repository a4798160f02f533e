#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace autoopt {

/// Raised when an operation is evaluated outside its domain (log of a
/// non-positive value, division by zero, fractional power of a negative base)
/// or produces a non-finite value.
class DomainFault : public std::runtime_error {
 public:
  DomainFault(std::string operation, double operand)
      : std::runtime_error("domain fault in " + operation + " at operand " + std::to_string(operand)),
        operation_(std::move(operation)),
        operand_(operand) {}

  const std::string& operation() const noexcept { return operation_; }
  double operand() const noexcept { return operand_; }

 private:
  std::string operation_;
  double operand_;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed model file. Line and column are 1-based; 0 means unknown.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& message, std::size_t line, std::size_t column)
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                           ": " + message),
        line_(line),
        column_(column) {}
  explicit FormatError(const std::string& message) : std::runtime_error(message), line_(0), column_(0) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, SourceSpan span)
      : std::runtime_error(message + " [" + std::to_string(span.begin) + "," +
                           std::to_string(span.end) + ")"),
        span_(span) {}

  SourceSpan span() const noexcept { return span_; }

 private:
  SourceSpan span_;
};

class EmitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularFit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class MissingReference : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace autoopt
