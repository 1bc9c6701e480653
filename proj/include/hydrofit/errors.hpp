#pragma once

#include <stdexcept>
#include <string>

namespace hydrofit {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A domain-type invariant was violated at construction time.
class InvariantError : public Error {
public:
    using Error::Error;
};

/// Malformed CSV content; message carries the 1-based line number.
class ParseError : public Error {
public:
    using Error::Error;
};

/// CSV header is missing a required column or does not match the schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Too few samples for the requested operation.
class TooShortError : public Error {
public:
    using Error::Error;
};

class InsufficientTrajectoriesError : public Error {
public:
    using Error::Error;
};

/// Derivative columns required but not populated.
class MissingDerivativesError : public Error {
public:
    using Error::Error;
};

/// A data column has (numerically) zero variance.
class DegenerateColumnError : public Error {
public:
    using Error::Error;
};

/// Target vector has zero variance.
class DegenerateTargetError : public Error {
public:
    using Error::Error;
};

/// AR model evaluated without the required lag history.
class MissingLagsError : public Error {
public:
    using Error::Error;
};

class ShapeMismatchError : public Error {
public:
    using Error::Error;
};

/// Guarded overflow in an exponential evaluation.
class OverflowError : public Error {
public:
    using Error::Error;
};

/// Design matrix is rank deficient (condition number above threshold).
class RankDeficientError : public Error {
public:
    using Error::Error;
};

/// NN training produced a non-finite loss.
class DivergedError : public Error {
public:
    using Error::Error;
};

class LengthMismatchError : public Error {
public:
    using Error::Error;
};

/// N too small relative to the model's parameter count.
class TooFewSamplesError : public Error {
public:
    using Error::Error;
};

/// Operation is defined only for a subset of model families.
class UnsupportedFamilyError : public Error {
public:
    using Error::Error;
};

/// Self-consistent air-pocket pressure solve failed to converge.
class NoFixedPointError : public Error {
public:
    using Error::Error;
};

}  // namespace hydrofit
