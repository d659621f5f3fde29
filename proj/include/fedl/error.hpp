#pragma once

#include <stdexcept>
#include <string>

namespace fedl {

// Error taxonomy. The CLI maps these onto exit codes:
//   DataError -> 2, NumericalError and subclasses -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input, unknown categorical ids, degenerate labels or splits.
class DataError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// Matrix/vector dimensions disagree with the network or each other.
class ShapeError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Size windows of the constrained clustering cannot be satisfied.
class InfeasibleError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A worker gradient was computed against an obsolete model version.
class StalenessError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace fedl
