#pragma once

#include <stdexcept>
#include <string>

namespace sdmtl {

/// Operand dimensions do not satisfy an operation's contract.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value is out of its admissible range.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An API precondition was violated by the caller.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (CSV, checkpoint, config file).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failure while reading or writing an artifact.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or a diverged computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sdmtl
