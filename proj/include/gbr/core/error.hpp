#pragma once

#include <stdexcept>
#include <string>

namespace gbr {

/// Failure classes surfaced by the pipeline. The CLI maps each class to a
/// distinct process exit code.
enum class ErrorKind { kConfig, kIo, kNumerical, kEmptyResult };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::kNumerical, what) {}
};

class EmptyResultError : public Error {
 public:
  explicit EmptyResultError(const std::string& what)
      : Error(ErrorKind::kEmptyResult, what) {}
};

inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kIo: return 3;
    case ErrorKind::kNumerical: return 4;
    case ErrorKind::kEmptyResult: return 5;
  }
  return 1;
}

}  // namespace gbr
