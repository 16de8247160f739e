#pragma once

#include <stdexcept>
#include <string>

namespace lorentz {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: a table, model, or config that violates a stated invariant.
/// The CLI maps these to exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A valid configuration that failed while running (grazing budget, no
/// collision found, ...). The CLI maps these to exit code 3.
class RuntimeFailure : public Error {
public:
    using Error::Error;
};

class EmptyTableError : public ValidationError {
public:
    EmptyTableError() : ValidationError("table has no scatterers") {}
};

class OverlapError : public ValidationError {
public:
    OverlapError(std::size_t first, std::size_t second, int ox, int oy, const std::string& what)
        : ValidationError(what), first_(first), second_(second), offset_x_(ox), offset_y_(oy) {}
    std::size_t first() const { return first_; }
    std::size_t second() const { return second_; }
    int offset_x() const { return offset_x_; }
    int offset_y() const { return offset_y_; }

private:
    std::size_t first_, second_;
    int offset_x_, offset_y_;
};

class RangeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NotOnBoundaryError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EnergyError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
public:
    ParseError(int line, const std::string& what) : ValidationError(what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Tangential (grazing) collision: |n·v| below the grazing tolerance.
class GrazingError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

/// No collision within the configured maximum flight time.
class MaxTimeError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

/// Accepted step ended inside a scatterer without a located crossing.
class TunnelError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class StiffnessError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

/// Finite-difference stencil straddles a singularity curve.
class StencilSingularityError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

/// Tangential-collision budget exceeded in an orbit.
class AbortError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class InsufficientDataError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

/// Autocovariance has not decayed at the window cap.
class WindowError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

}  // namespace lorentz
