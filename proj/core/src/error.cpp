#include "mscalib/error.hpp"

namespace mscalib {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::InsufficientMatches: return "InsufficientMatches";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::AmbiguousDecomposition: return "AmbiguousDecomposition";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateQuad: return "DegenerateQuad";
    case ErrorCode::UnknownStep: return "UnknownStep";
    case ErrorCode::QuotaUnreachable: return "QuotaUnreachable";
    case ErrorCode::NoValidPair: return "NoValidPair";
    case ErrorCode::InitializationFailed: return "InitializationFailed";
    case ErrorCode::NoRegistrableCamera: return "NoRegistrableCamera";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::NoEvaluableTracks: return "NoEvaluableTracks";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void raise(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace mscalib
