#include "mict/error.hpp"

namespace mict {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::Domain: return "domain";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::MalformedHeader: return "malformed-header";
    case ErrorCode::SizeMismatch: return "size-mismatch";
    case ErrorCode::UnsupportedElementType: return "unsupported-element-type";
    case ErrorCode::Io: return "io";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::DisallowedCombination: return "disallowed-combination";
    case ErrorCode::Ambiguity: return "ambiguity";
    case ErrorCode::Library: return "library";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::DegenerateSolve: return "degenerate-solve";
    case ErrorCode::EmptySurface: return "empty-surface";
    case ErrorCode::OverlappingElectrodes: return "overlapping-electrodes";
  }
  return "unknown";
}

}  // namespace mict
