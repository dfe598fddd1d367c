#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kronsketch {

/// Error categories. The numeric values double as CLI exit codes where one
/// exists (see tools/sketchbench.cpp).
enum class ErrorCode : int {
  invalid_argument = 2,
  numeric_error = 3,
  search_exhausted = 4,
  undefined_correlation = 5,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::numeric_error: return "numeric-error";
    case ErrorCode::search_exhausted: return "search-exhausted";
    case ErrorCode::undefined_correlation: return "undefined-correlation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string("[") + error_code_name(code) + "] " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorCode::invalid_argument, what) {}
};

class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t iteration)
      : Error(ErrorCode::numeric_error, what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class UndefinedCorrelation : public Error {
 public:
  explicit UndefinedCorrelation(const std::string& what)
      : Error(ErrorCode::undefined_correlation, what) {}
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace kronsketch
