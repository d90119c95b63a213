#pragma once

#include <stdexcept>
#include <string>

namespace tbq {

// Every failure raised by the library derives from Error so the CLI can map
// it onto an exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* code() const noexcept { return "ERROR"; }
};

// Argument outside the mathematical domain of an operation (bad config,
// invariant violation, Nyquist violation, ...).
class DomainError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "DOMAIN"; }
};

// Malformed or unknown configuration keys.
class ConfigError : public DomainError {
 public:
  using DomainError::DomainError;
  const char* code() const noexcept override { return "CONFIG"; }
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "INSUFFICIENT_DATA"; }
};

class LengthMismatchError : public DomainError {
 public:
  using DomainError::DomainError;
  const char* code() const noexcept override { return "LENGTH_MISMATCH"; }
};

class ZeroVarianceError : public DomainError {
 public:
  using DomainError::DomainError;
  const char* code() const noexcept override { return "ZERO_VARIANCE"; }
};

class FormatError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "FORMAT"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "IO"; }
};

class InternalError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "INTERNAL"; }
};

namespace detail {

template <class E = DomainError>
inline void require(bool cond, const std::string& what) {
  if (!cond) throw E(what);
}

}  // namespace detail
}  // namespace tbq
