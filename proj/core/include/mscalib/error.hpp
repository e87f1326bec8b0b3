#pragma once

#include <stdexcept>
#include <string>

namespace mscalib {

enum class ErrorCode {
  NonPositiveDepth,
  DegenerateGeometry,
  InsufficientMatches,
  NoConsensus,
  AmbiguousDecomposition,
  OutOfBounds,
  ShapeMismatch,
  DegenerateQuad,
  UnknownStep,
  QuotaUnreachable,
  NoValidPair,
  InitializationFailed,
  NoRegistrableCamera,
  NonConvergence,
  DegenerateConfiguration,
  IdMismatch,
  NoEvaluableTracks,
  InvalidArgument,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

}  // namespace mscalib
