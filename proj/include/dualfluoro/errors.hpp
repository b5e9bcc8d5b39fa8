#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dualfluoro {

enum class ErrorCode {
  DegenerateRay,
  EmptyVolume,
  MissingLabel,
  OutOfRange,
  WrongCount,
  TooFewBeads,
  RankDeficient,
  NonConvergence,
  TooFewLandmarks,
  DimMismatch,
  LengthMismatch,
  InvalidArgument,
  Parse,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code. All library failures use it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dualfluoro
