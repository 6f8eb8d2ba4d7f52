#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spoc {

enum class ErrorCode {
  kDegenerateInput,
  kFileError,
  kSchemaError,
  kEmptyDataset,
  kOutOfRange,
  kDimensionMismatch,
  kInvalidSpec,
  kTooFewClasses,
  kEmptyClass,
  kBatchTooSmall,
  kUnfitted,
  kLabelOutOfRange,
  kStaleCache,
  kInvalidKind,
  kLengthMismatch,
  kEmptyInput,
  kDivergence,
};

[[nodiscard]] std::string_view error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an outcome without parsing
/// messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace spoc
