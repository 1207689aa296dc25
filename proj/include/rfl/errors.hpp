#pragma once

#include <stdexcept>
#include <string>

namespace rfl {

enum class ErrorKind {
  NegativeDensity,
  PoleOnGrid,
  UnresolvableLag,
  MinimalityViolated,
  ZeroDenominator,
  OverlappingGaps,
  GapTouchesOrigin,
  GapUnderResolved,
  SingularDensitySum,
  IllConditioned,
  NoConvergence,
  MinimalityLost,
  InfeasibleClass,
  EmptyObservationGrid,
  InvalidArgument,
  ConfigParse,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NegativeDensity: return "NegativeDensity";
    case ErrorKind::PoleOnGrid: return "PoleOnGrid";
    case ErrorKind::UnresolvableLag: return "UnresolvableLag";
    case ErrorKind::MinimalityViolated: return "MinimalityViolated";
    case ErrorKind::ZeroDenominator: return "ZeroDenominator";
    case ErrorKind::OverlappingGaps: return "OverlappingGaps";
    case ErrorKind::GapTouchesOrigin: return "GapTouchesOrigin";
    case ErrorKind::GapUnderResolved: return "GapUnderResolved";
    case ErrorKind::SingularDensitySum: return "SingularDensitySum";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::MinimalityLost: return "MinimalityLost";
    case ErrorKind::InfeasibleClass: return "InfeasibleClass";
    case ErrorKind::EmptyObservationGrid: return "EmptyObservationGrid";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigParse: return "ConfigParse";
  }
  return "Unknown";
}

/// True for failures of the numerics rather than of the inputs.
inline bool is_numerical_failure(ErrorKind kind) {
  return kind == ErrorKind::IllConditioned || kind == ErrorKind::NoConvergence;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rfl
