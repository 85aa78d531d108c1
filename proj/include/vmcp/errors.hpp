#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vmcp {

// Bad arguments are reported with std::invalid_argument; the types below
// cover the structured failures callers are expected to distinguish.

class EmptyDistributionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class KeyNotFoundError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class WeightUnderflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data. `line()` is 1-based, 0 when unknown.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace vmcp
