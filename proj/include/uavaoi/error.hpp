#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uavaoi {

enum class ErrorCode {
  kConfig,
  kAltitudeExceedsRange,
  kBadGeometry,
  kNoScheduledSn,
  kEnergyCausalityViolation,
  kOutOfArea,
  kEpisodeOver,
  kMaskViolation,
  kEmptyMask,
  kDimensionMismatch,
  kNonFiniteLoss,
  kIo,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kAltitudeExceedsRange: return "AltitudeExceedsRange";
    case ErrorCode::kBadGeometry: return "BadGeometry";
    case ErrorCode::kNoScheduledSn: return "NoScheduledSn";
    case ErrorCode::kEnergyCausalityViolation: return "EnergyCausalityViolation";
    case ErrorCode::kOutOfArea: return "OutOfArea";
    case ErrorCode::kEpisodeOver: return "EpisodeOver";
    case ErrorCode::kMaskViolation: return "MaskViolation";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above so that
// callers (tests, the CLI exit-code mapping) can dispatch without string
// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace uavaoi
