#pragma once

#include <stdexcept>
#include <string>

namespace bamld {

// Dimension mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Cholesky failed even after the maximum diagonal jitter.
class DecompositionError : public std::runtime_error {
 public:
  DecompositionError(const std::string& what, double attempted_jitter)
      : std::runtime_error(what), jitter_(attempted_jitter) {}
  double attempted_jitter() const noexcept { return jitter_; }

 private:
  double jitter_;
};

// Non-finite values produced by an update step.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Oracle misuse: unknown task id or relabeling.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Task selection on an empty pool, or loop ran out of tasks.
class SelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid experiment configuration; field() names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace bamld
