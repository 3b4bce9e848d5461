#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mpr {

enum class ErrorCode {
  kEmptyInput,
  kCleanStageRequested,
  kInvalidConfig,
  kTimeout,
  kHttpStatus,
  kMalformedResponse,
  kRetriesExhausted,
  kUnsupportedByBackend,
  kUnparseableClassification,
  kUnparseableVerdict,
  kUnparseable,
  kOutOfRange,
  kEmptyScores,
  kEmptyOutcomes,
  kNoReferences,
  kMalformedLine,
  kDuplicateId,
  kIoError,
  kEmptyRows,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// HTTP status failures carry the status code.
class HttpStatusError : public Error {
 public:
  HttpStatusError(int status, const std::string& message)
      : Error(ErrorCode::kHttpStatus, "status " + std::to_string(status) + ": " + message),
        status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace mpr
