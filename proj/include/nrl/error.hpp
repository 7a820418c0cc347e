#pragma once

#include <stdexcept>
#include <string>

namespace nrl {

enum class ErrorCode {
  OutOfChart,
  OnBoundary,
  FitFailure,
  DegenerateMetric,
  ExtrapolationUnstable,
  StepFailure,
  LeftDomain,
  ChartUnavailable,
  SpectrumOverflow,
  GridMismatch,
  BoundViolated,
  ResampleOverflow,
  DegenerateFamily,
  ConfigInvalid,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nrl
