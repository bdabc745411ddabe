#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace newton_lab {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: malformed files, invalid configuration, out-of-range
/// arguments. The CLI maps these to exit status 1.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Failures of the numerics themselves. The CLI maps these to exit status 2.
class NumericalError : public Error {
public:
  using Error::Error;
};

class SingularMatrix : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class NotPositiveDefinite : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class SingularJacobian : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class DomainEscape : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
public:
  NoConvergence(const std::string& what, long step = -1)
      : NumericalError(what), step_(step) {}
  /// Time step at which the failure happened, -1 when not inside a run.
  long step() const noexcept { return step_; }

private:
  long step_;
};

class ZeroReference : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class NoRealRoots : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class DegenerateQuadratic : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class EstimateInvalid : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Argument outside the accepted domain (non-positive, non-finite,
/// subnormal, outside an interval).
class DomainError : public ConfigError {
public:
  using ConfigError::ConfigError;
};

class NonPositive : public DomainError {
public:
  using DomainError::DomainError;
};

class NonFinite : public DomainError {
public:
  using DomainError::DomainError;
};

class Subnormal : public DomainError {
public:
  using DomainError::DomainError;
};

class OutOfRange : public DomainError {
public:
  using DomainError::DomainError;
};

class ParseError : public ConfigError {
public:
  ParseError(const std::string& what, std::size_t line)
      : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

}  // namespace newton_lab
