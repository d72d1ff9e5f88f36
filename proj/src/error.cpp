#include "imime/error.hpp"

namespace imime {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::RectTooSmall: return "RectTooSmall";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyReferenceSet: return "EmptyReferenceSet";
    case Errc::InsufficientHistory: return "InsufficientHistory";
    case Errc::TooFewFrames: return "TooFewFrames";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UnknownStateOrAction: return "UnknownStateOrAction";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::EmptyActionSet: return "EmptyActionSet";
    case Errc::AngleCountMismatch: return "AngleCountMismatch";
    case Errc::WeightSumError: return "WeightSumError";
    case Errc::LayoutMismatch: return "LayoutMismatch";
    case Errc::BadHeader: return "BadHeader";
    case Errc::TruncatedChunk: return "TruncatedChunk";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::BadVLQ: return "BadVLQ";
    case Errc::UnknownPoseLabel: return "UnknownPoseLabel";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace imime
