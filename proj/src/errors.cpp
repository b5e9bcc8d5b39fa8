#include "dualfluoro/errors.hpp"

namespace dualfluoro {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateRay: return "DegenerateRay";
    case ErrorCode::EmptyVolume: return "EmptyVolume";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::WrongCount: return "WrongCount";
    case ErrorCode::TooFewBeads: return "TooFewBeads";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::TooFewLandmarks: return "TooFewLandmarks";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace dualfluoro
