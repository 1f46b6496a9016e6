#pragma once

#include <stdexcept>
#include <string>

namespace lio {

enum class ErrorCode {
  NonFiniteInput,
  AngleNearPi,
  AntipodeSingularity,
  AntipodalPair,
  SingularInnovation,
  InsufficientMap,
  MissingPoseCoverage,
  DegenerateCloud,
  DatasetCorrupt,
  FilterDiverged,
  MismatchedDataset,
  BadConfig,
  IoError,
  GatedOutlier,
};

const char* error_code_name(ErrorCode code);

// Exception carrying a machine-checkable code plus a human-readable message.
class LioError : public std::runtime_error {
 public:
  LioError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lio
