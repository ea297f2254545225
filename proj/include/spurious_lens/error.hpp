#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spurious_lens {

enum class ErrorCode {
  kInvalidConfig,
  kInvalidDimension,
  kShapeMismatch,
  kInsufficientData,
  kInvalidRegularizer,
  kInvalidLabel,
  kInvalidK,
  kInsufficientSamples,
  kParse,
  kNonConvergence,
  kSingularParameters,
  kDegenerateFit,
  kDomain,
};

const char* to_string(ErrorCode code);

// Input errors map to CLI exit code 2, numerical failures to exit code 3.
bool is_numerical_failure(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Line numbers are 1-based and count the header row.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& message)
      : Error(ErrorCode::kParse,
              source + ":" + std::to_string(line) + ": " + message),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

}  // namespace spurious_lens
