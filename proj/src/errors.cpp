#include "probekit/errors.hpp"

namespace probekit {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidShape: return "InvalidShape";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kCorruptArchive: return "CorruptArchive";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kLayerNotFound: return "LayerNotFound";
    case ErrorCode::kDegenerateVector: return "DegenerateVector";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kDivergedTraining: return "DivergedTraining";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kNotVisualizable: return "NotVisualizable";
    case ErrorCode::kUndefined: return "Undefined";
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kSplitTooSmall: return "SplitTooSmall";
  }
  return "Unknown";
}

}  // namespace probekit
