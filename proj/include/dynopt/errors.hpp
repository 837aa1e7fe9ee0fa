#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dynopt {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression or problem text. `position` is a 0-based character offset.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t position)
        : Error(message + " (at column " + std::to_string(position + 1) + ")"), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class UnknownIdentifier : public ParseError {
public:
    using ParseError::ParseError;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class MissingBinding : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class NotAffine : public Error {
public:
    using Error::Error;
};

/// The constraint pair is not second class ({Φ₁,Φ₂} vanishes identically).
class DegenerateError : public Error {
public:
    using Error::Error;
};

class ConstraintLoopError : public Error {
public:
    using Error::Error;
};

class NoCriticalPoint : public Error {
public:
    using Error::Error;
};

/// A critical point of the Hamiltonian in u is not a maximum.
class WrongCurvature : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    using Error::Error;
};

class GridError : public Error {
public:
    using Error::Error;
};

class CFLViolation : public Error {
public:
    CFLViolation(const std::string& message, long required_nt)
        : Error(message), required_nt_(required_nt) {}

    /// Smallest number of t-grid points that keeps every step within the CFL bound.
    long required_nt() const noexcept { return required_nt_; }

private:
    long required_nt_;
};

}  // namespace dynopt
