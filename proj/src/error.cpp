#include "shapemorph/error.hpp"

namespace shapemorph {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::format: return "format";
    case ErrorCode::shape: return "shape";
    case ErrorCode::domain: return "domain";
    case ErrorCode::io: return "io";
    case ErrorCode::empty_overlap: return "empty_overlap";
    case ErrorCode::non_psd: return "non_psd";
    case ErrorCode::conditioning: return "conditioning";
    case ErrorCode::coverage: return "coverage";
    case ErrorCode::fit_failure: return "fit_failure";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::undefined_test: return "undefined_test";
    case ErrorCode::sampling: return "sampling";
    case ErrorCode::dense_limit: return "dense_limit";
    case ErrorCode::degenerate_axis: return "degenerate_axis";
    case ErrorCode::empty_selection: return "empty_selection";
    case ErrorCode::checksum_mismatch: return "checksum_mismatch";
    case ErrorCode::cancelled: return "cancelled";
  }
  return "unknown";
}

}  // namespace shapemorph
