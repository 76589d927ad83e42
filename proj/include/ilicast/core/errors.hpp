#pragma once

#include <stdexcept>
#include <string>

namespace ilicast {

/// Tensor or layer dimensions disagree.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input data violates an operation's precondition (empty, out of range, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numeric hyperparameter is outside its admissible domain.
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A component was configured inconsistently.
class ConfigurationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A required date is missing from a series.
class DataGapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Not enough observations to perform the requested computation.
class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model was asked for a prediction mode it does not support.
class MisuseError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Training produced a non-finite value.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Numerical routine failed (e.g. a kernel matrix is not positive definite).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ilicast
