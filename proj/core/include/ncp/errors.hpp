#pragma once

#include <stdexcept>
#include <string>

namespace ncp {

/// Precondition violated by the caller (shape mismatch, out-of-range hyperparameter, ...).
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value where a finite one was required.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (CSV, checkpoint, serialized network).
class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input file is well formed but does not match the declared schema.
class SchemaError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad experiment configuration text or override.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A run exceeded its configured wall-clock budget.
class BudgetExceeded : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace ncp
