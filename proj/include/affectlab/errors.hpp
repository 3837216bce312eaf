#pragma once

#include <stdexcept>
#include <string>

namespace affectlab {

// Caller passed something that violates a documented precondition.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data (files, records, feature values) failed validation.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A callback broke its contract (e.g. a loss function that is not deterministic).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace affectlab
