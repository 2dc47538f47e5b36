#include "mflab/error.hpp"

namespace mflab {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SolverCapExceeded: return "SolverCapExceeded";
    case Errc::TooLarge: return "TooLarge";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::TooFewLayers: return "TooFewLayers";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::TraceMismatch: return "TraceMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::StepFailure: return "StepFailure";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::FitFailure: return "FitFailure";
    case Errc::CertificateViolated: return "CertificateViolated";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace mflab
