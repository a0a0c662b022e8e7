#ifndef ROAM_ERROR_HPP
#define ROAM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace roam {

enum class ErrorCode {
  ShapeMismatch,
  OutOfRangeLabel,
  DegeneratePixel,
  NonpositiveAlpha,
  EmptyKappaSet,
  UnknownLayer,
  MissingSkip,
  ChannelMismatch,
  BadMarker,
  EmptyDataset,
  EmptyMask,
  IncompatibleCheckpoint,
  MissingCheckpoint,
  NoUnlabeledData,
  UnsatisfiableSpec,
  FractionSum,
  MalformedFile,
  LabelRange,
  ConfigInvalid,
  IoFailure,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::OutOfRangeLabel: return "OUT_OF_RANGE_LABEL";
    case ErrorCode::DegeneratePixel: return "DEGENERATE_PIXEL";
    case ErrorCode::NonpositiveAlpha: return "NONPOSITIVE_ALPHA";
    case ErrorCode::EmptyKappaSet: return "EMPTY_KAPPA_SET";
    case ErrorCode::UnknownLayer: return "UNKNOWN_LAYER";
    case ErrorCode::MissingSkip: return "MISSING_SKIP";
    case ErrorCode::ChannelMismatch: return "CHANNEL_MISMATCH";
    case ErrorCode::BadMarker: return "BAD_MARKER";
    case ErrorCode::EmptyDataset: return "EMPTY_DATASET";
    case ErrorCode::EmptyMask: return "EMPTY_MASK";
    case ErrorCode::IncompatibleCheckpoint: return "INCOMPATIBLE_CHECKPOINT";
    case ErrorCode::MissingCheckpoint: return "MISSING_CHECKPOINT";
    case ErrorCode::NoUnlabeledData: return "NO_UNLABELED_DATA";
    case ErrorCode::UnsatisfiableSpec: return "UNSATISFIABLE_SPEC";
    case ErrorCode::FractionSum: return "FRACTION_SUM";
    case ErrorCode::MalformedFile: return "MALFORMED_FILE";
    case ErrorCode::LabelRange: return "LABEL_RANGE";
    case ErrorCode::ConfigInvalid: return "CONFIG_INVALID";
    case ErrorCode::IoFailure: return "IO_FAILURE";
  }
  return "UNKNOWN";
}

/// Exception carrying a machine-checkable code plus a human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace roam

#endif  // ROAM_ERROR_HPP
