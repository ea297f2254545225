#include "spurious_lens/error.hpp"

namespace spurious_lens {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kInvalidDimension: return "invalid-dimension";
    case ErrorCode::kShapeMismatch: return "shape";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kInvalidRegularizer: return "invalid-regularizer";
    case ErrorCode::kInvalidLabel: return "invalid-label";
    case ErrorCode::kInvalidK: return "invalid-k";
    case ErrorCode::kInsufficientSamples: return "insufficient-samples";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kNonConvergence: return "nonconvergence";
    case ErrorCode::kSingularParameters: return "singular-parameters";
    case ErrorCode::kDegenerateFit: return "degenerate-fit";
    case ErrorCode::kDomain: return "domain";
  }
  return "unknown";
}

bool is_numerical_failure(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonConvergence:
    case ErrorCode::kSingularParameters:
    case ErrorCode::kDegenerateFit:
    case ErrorCode::kDomain:
      return true;
    default:
      return false;
  }
}

}  // namespace spurious_lens
