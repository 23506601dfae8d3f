#include "termmap/error.hpp"

namespace termmap {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid_input";
    case ErrorCode::EmptyQuery: return "empty_query";
    case ErrorCode::StoreUnavailable: return "store_unavailable";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::IngestError: return "ingest_error";
    case ErrorCode::FormatError: return "format_error";
    case ErrorCode::ProviderUnavailable: return "provider_unavailable";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::BuildFailed: return "build_failed";
    case ErrorCode::BackendUnavailable: return "backend_unavailable";
    case ErrorCode::EmptyGeneration: return "empty_generation";
    case ErrorCode::ValidationError: return "validation_error";
  }
  return "unknown";
}

}  // namespace termmap
