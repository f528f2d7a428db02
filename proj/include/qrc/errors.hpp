#pragma once

#include <stdexcept>
#include <string>

namespace qrc {

/// Input violated a documented precondition.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operand shapes are incompatible.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A configured size cap would be exceeded.
class SizeError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// A numerical routine failed (non-convergence, divergence).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unknown configuration entry.
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

}  // namespace qrc
