#pragma once

#include <stdexcept>
#include <string>

namespace gluekit {

/// Failure categories; numeric values double as CLI exit codes.
enum class ErrorCode : int {
  Config = 2,
  Data = 3,
  Numerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::Config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCode::Data, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorCode::Numerical, what) {}
};

}  // namespace gluekit
