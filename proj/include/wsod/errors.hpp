#pragma once

#include <stdexcept>
#include <string>

namespace wsod {

/// Malformed arguments to an operation (bad box, mismatched lengths, ...).
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Configuration value outside its documented range.
struct InvalidConfig : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Training could not produce a usable model.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller broke a stateful protocol (out-of-order stream index, re-consumed stream).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

/// File read/write failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace wsod
