// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace emap {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or parameters (odd embedding dims, K=1, bad template...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Wrong invocation of a public entry point (missing conditioning image, empty split).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Persisted data is missing, corrupt, truncated, or of the wrong version.
class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& what, std::vector<std::string> offenders = {})
      : Error(what), offenders_(std::move(offenders)) {}

  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  std::vector<std::string> offenders_;
};

class VersionError : public IntegrityError {
 public:
  VersionError(const std::string& what, unsigned found, unsigned expected)
      : IntegrityError(what), found_(found), expected_(expected) {}

  unsigned found() const noexcept { return found_; }
  unsigned expected() const noexcept { return expected_; }

 private:
  unsigned found_;
  unsigned expected_;
};

/// Violated calling contract (non-scalar loss, repeated backward pass).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN activations, NaN gradients, or a diverged loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class FetchError : public Error {
 public:
  FetchError(const std::string& what, int status, int attempts)
      : Error(what), status_(status), attempts_(attempts) {}

  /// HTTP status of the last attempt, or -1 when no response was received.
  int status() const noexcept { return status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int status_;
  int attempts_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace emap
