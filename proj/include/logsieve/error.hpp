#pragma once

#include <stdexcept>
#include <string>

namespace logsieve {

/// Failure category; maps onto the CLI exit codes (2, 3, 4).
enum class ErrorKind {
  kInput = 2,       // missing/unreadable files, malformed input
  kValidation = 3,  // well-formed input that violates a contract
  kExternal = 4,    // network, HTTP, LLM endpoint
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::kInput, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::kValidation, what) {}
};

class ExternalError : public Error {
 public:
  explicit ExternalError(const std::string& what)
      : Error(ErrorKind::kExternal, what) {}
};

}  // namespace logsieve
