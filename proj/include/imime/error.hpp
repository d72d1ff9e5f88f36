#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace imime {

enum class Errc {
  InvalidArgument,
  RectTooSmall,
  DimensionMismatch,
  EmptyReferenceSet,
  InsufficientHistory,
  TooFewFrames,
  LengthMismatch,
  UnknownStateOrAction,
  NonConvergence,
  EmptyActionSet,
  AngleCountMismatch,
  WeightSumError,
  LayoutMismatch,
  BadHeader,
  TruncatedChunk,
  UnsupportedFormat,
  BadVLQ,
  UnknownPoseLabel,
  ConfigError,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace imime
