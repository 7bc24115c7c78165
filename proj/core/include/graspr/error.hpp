#pragma once

#include <stdexcept>
#include <string>

namespace graspr {

/// Machine-readable error categories. The CLI and HTTP layers render these
/// into the `{code, message, detail}` envelope.
enum class ErrorCode {
  kInvalidArgument,
  kRejectedPose,
  kDegenerateGeometry,
  kFrame,
  kShapeMismatch,
  kFeatureOrder,
  kUndefinedStatistic,
  kSchema,
  kDanglingReference,
  kNotFound,
  kConflict,
  kIo,
};

const char* ToString(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace graspr
