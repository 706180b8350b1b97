#pragma once

#include <stdexcept>
#include <string>

namespace shapemorph {

enum class ErrorCode {
  format,            // file does not parse
  shape,             // dimension / row-count mismatch
  domain,            // argument outside its valid range
  io,                // file missing or unreadable / unwritable
  empty_overlap,     // no mesh node has a CoP point within range
  non_psd,           // Cholesky failed after jitter escalation
  conditioning,      // duplicate or singular conditioning points
  coverage,          // mesh component without key nodes
  fit_failure,       // every optimizer restart diverged
  insufficient_data, // too few fits for batch statistics
  undefined_test,    // t-test with zero variance on both sides
  sampling,          // rejection budget exhausted
  dense_limit,       // dense sampler asked for too many points
  degenerate_axis,   // bend axis passes through every key node
  empty_selection,   // patch box encloses no key node
  checksum_mismatch, // file belongs to a different mesh
  cancelled,         // caller aborted a long-running operation
};

enum class ErrorCategory { validation, io, numerical };

const char* to_string(ErrorCode code);

inline ErrorCategory category(ErrorCode code) {
  switch (code) {
    case ErrorCode::io:
      return ErrorCategory::io;
    case ErrorCode::non_psd:
    case ErrorCode::conditioning:
    case ErrorCode::coverage:
    case ErrorCode::fit_failure:
    case ErrorCode::undefined_test:
    case ErrorCode::sampling:
    case ErrorCode::degenerate_axis:
      return ErrorCategory::numerical;
    default:
      return ErrorCategory::validation;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return shapemorph::category(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace shapemorph
