#pragma once

#include <stdexcept>
#include <string>

namespace smoothsinger {

// Input that violates a documented contract (bad shapes, out-of-range
// arguments, malformed files). The CLI maps these to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Failures discovered while computing (non-finite values, I/O).
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace smoothsinger
