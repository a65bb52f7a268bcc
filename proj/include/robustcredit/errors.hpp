#pragma once

#include <stdexcept>
#include <string>

namespace robustcredit {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration problems (CLI exit code 1).
class SchemaError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

class SeedError : public Error {
public:
    using Error::Error;
};

// Numerical failures (CLI exit code 2).
class NumericalError : public Error {
public:
    using Error::Error;
};

class BracketError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConsistencyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DomainError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SingularMatrixError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class FocResidualError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace robustcredit
