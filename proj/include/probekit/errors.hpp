#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace probekit {

enum class ErrorCode {
  kInvalidShape,
  kIoError,
  kCorruptArchive,
  kUnsupportedVersion,
  kLayerNotFound,
  kDegenerateVector,
  kEmptyDataset,
  kDivergedTraining,
  kInvalidConfig,
  kNotVisualizable,
  kUndefined,
  kDomainError,
  kDimensionMismatch,
  kSplitTooSmall,
};

std::string_view error_code_name(ErrorCode code);

// All toolkit failures surface as this exception; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace probekit
