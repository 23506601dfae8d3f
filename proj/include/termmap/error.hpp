#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace termmap {

enum class ErrorCode {
  InvalidInput,
  EmptyQuery,
  StoreUnavailable,
  NotFound,
  IngestError,
  FormatError,
  ProviderUnavailable,
  DimensionMismatch,
  BuildFailed,
  BackendUnavailable,
  EmptyGeneration,
  ValidationError,
};

/// Stable snake_case name used in JSON error bodies and error events.
std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace termmap
