#ifndef IPROMP_ERROR_H_
#define IPROMP_ERROR_H_

#include <stdexcept>
#include <string>

namespace ipromp {

// Error categories. The numeric values are the CLI exit codes.
enum class ErrorCategory {
  kConfig = 2,
  kData = 3,
  kNumerical = 4,
};

// Finer-grained reasons for data errors.
enum class DataErrorKind {
  kSchema,     // malformed file, wrong field types, missing keys
  kVersion,    // unsupported schema_version
  kDimension,  // P/Q/sample width mismatch
  kNonFinite,  // NaN or Inf in numeric payload
  kDomain,     // value outside the operation's domain
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const { return category_; }
  int exit_code() const { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::kConfig, what) {}
};

class DataError : public Error {
 public:
  DataError(DataErrorKind kind, const std::string& what)
      : Error(ErrorCategory::kData, what), kind_(kind) {}

  DataErrorKind kind() const { return kind_; }

 private:
  DataErrorKind kind_;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorCategory::kNumerical, what) {}
};

}  // namespace ipromp

#endif  // IPROMP_ERROR_H_
