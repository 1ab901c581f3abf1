#pragma once

#include <stdexcept>
#include <string>

namespace loopchan {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A quantity was requested outside the domain where it is defined (t <= 0, x off the loop).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A parameter or configuration value violates its invariants.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Input data are malformed, too short, or carry no usable signal.
class DataError : public Error {
public:
    using Error::Error;
};

/// Input data do not have the shape the extraction procedure assumes.
class FitQualityError : public Error {
public:
    using Error::Error;
};

/// No local solve of a fitting problem reached convergence.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::string diagnostics)
        : Error(what), diagnostics_(std::move(diagnostics)) {}

    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

}  // namespace loopchan
