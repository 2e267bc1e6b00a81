#ifndef CWI_ERROR_HPP
#define CWI_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cwi {

// Exit codes used by the command line tool. Each error class maps to one.
enum class ExitCode : int {
  kSuccess = 0,
  kValidation = 1,
  kMissingResource = 2,
  kNumerical = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

// Malformed input: bad field counts, non-numeric values, bad headers.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line = 0);
  std::size_t line() const noexcept { return line_; }
  ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a contract (offsets, shapes, configs).
class ValidationError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }
};

class MissingResourceError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override {
    return ExitCode::kMissingResource;
  }
};

// Divergence, non-finite values, under-determined systems.
class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

}  // namespace cwi

#endif  // CWI_ERROR_HPP
