#pragma once

#include <stdexcept>
#include <string>

namespace vigor {

/// Operand shapes do not agree.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// An object was used in the wrong lifecycle state (e.g. backward before forward).
class StateError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Input data violates a documented contract.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A statistic is undefined for the given input (constant vector, n too small).
class DegenerateInputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared during optimisation.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// CSV or schema problems while reading a dataset.
class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace vigor
