#include "graspr/error.hpp"

namespace graspr {

const char* ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kRejectedPose: return "rejected_pose";
    case ErrorCode::kDegenerateGeometry: return "degenerate_geometry";
    case ErrorCode::kFrame: return "frame_error";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kFeatureOrder: return "feature_order_mismatch";
    case ErrorCode::kUndefinedStatistic: return "undefined_statistic";
    case ErrorCode::kSchema: return "schema_violation";
    case ErrorCode::kDanglingReference: return "dangling_reference";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

}  // namespace graspr
