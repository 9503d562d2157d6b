#pragma once

#include <stdexcept>
#include <string>

namespace dcflow {

/// Bad input: shapes, ranges, nonpositive coefficients, malformed files.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A linear solve or factorization could not produce an acceptable answer.
class SolverFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Generalized eigenproblem whose right-hand form is not positive definite.
class DecompositionFailure : public SolverFailure {
public:
    using SolverFailure::SolverFailure;
};

/// Not enough samples to form an estimate.
class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An internal consistency check failed; indicates a bug, not bad input.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace dcflow
