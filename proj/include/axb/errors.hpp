#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace axb {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operand dimensions do not conform.
struct ShapeError : Error {
    using Error::Error;
};

/// Argument outside its mathematical domain (negative weights, zero reference, ...).
struct DomainError : Error {
    using Error::Error;
};

/// Result would exceed a hard size guard.
struct CapacityError : Error {
    using Error::Error;
};

/// Invalid run configuration (bad method/theta/alpha combination, bad flags).
struct ConfigError : Error {
    using Error::Error;
};

/// File system or stream failure.
struct IoError : Error {
    using Error::Error;
};

/// Malformed input file; carries the 1-based line number when known.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t line_no)
        : Error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
    explicit ParseError(const std::string& msg) : Error(msg), line(0) {}
    std::size_t line;
};

/// A matrix factorization failed to converge within its sweep cap.
struct DecompositionError : Error {
    using Error::Error;
};

/// An iteration failed to converge; carries the last estimate for diagnostics.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& msg, double estimate)
        : Error(msg), last_estimate(estimate) {}
    double last_estimate;
};

/// Non-finite values appeared in the iterate.
struct DivergenceError : Error {
    DivergenceError(std::size_t k, double residual)
        : Error("divergence at iteration " + std::to_string(k) +
                ", residual frobenius norm " + std::to_string(residual)),
          iteration(k), residual_norm(residual) {}
    std::size_t iteration;
    double residual_norm;
};

/// A provably-impossible internal state was reached; indicates a bug.
struct InvariantError : Error {
    using Error::Error;
};

}  // namespace axb
