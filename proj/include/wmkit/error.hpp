#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wmkit
{

enum class ErrorCode
{
  InvalidArgument,
  DegenerateTrajectory,
  IndexOutOfRange,
  InvalidRate,
  LengthMismatch,
  EmptyPath,
  SetTooSmall,
  DimensionMismatch,
  ShapeMismatch,
  ZeroVector,
  MaskedTokenPresent,
  TauOutOfRange,
  PredictorShapeMismatch,
  StateExhausted,
  NoMaskedPositions,
  ContextUnderfilled,
  InvalidSpec,
  HorizonExceeded,
  InvalidPreset,
  ParseError,
  InconsistentRate,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code)
{
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateTrajectory: return "DegenerateTrajectory";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidRate: return "InvalidRate";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyPath: return "EmptyPath";
    case ErrorCode::SetTooSmall: return "SetTooSmall";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::MaskedTokenPresent: return "MaskedTokenPresent";
    case ErrorCode::TauOutOfRange: return "TauOutOfRange";
    case ErrorCode::PredictorShapeMismatch: return "PredictorShapeMismatch";
    case ErrorCode::StateExhausted: return "StateExhausted";
    case ErrorCode::NoMaskedPositions: return "NoMaskedPositions";
    case ErrorCode::ContextUnderfilled: return "ContextUnderfilled";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::HorizonExceeded: return "HorizonExceeded";
    case ErrorCode::InvalidPreset: return "InvalidPreset";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InconsistentRate: return "InconsistentRate";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (notably the CLI) can map it without string matching.
class Error : public std::runtime_error
{
public:
  Error(ErrorCode code, const std::string & message)
  : std::runtime_error(message), code_(code)
  {
  }

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string & message)
{
  throw Error(code, std::string(to_string(code)) + ": " + message);
}

}  // namespace wmkit
