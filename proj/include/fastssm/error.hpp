#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fastssm {

// Every failure raised by the library derives from Error. The CLI maps
// DataError/ConfigError/ShapeError to exit code 1 and NumericalError (and its
// subclasses) to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class RankError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConditioningError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ResonanceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class CalibrationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InstabilityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

// Non-fatal messages accumulated by an operation and surfaced by the caller.
using Warnings = std::vector<std::string>;

}  // namespace fastssm
