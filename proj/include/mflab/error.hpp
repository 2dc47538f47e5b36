#pragma once
#include <stdexcept>
#include <string>

namespace mflab {

enum class Errc {
  DimensionMismatch,
  SolverCapExceeded,
  TooLarge,
  GridMismatch,
  TooFewLayers,
  NonFiniteState,
  TraceMismatch,
  ShapeMismatch,
  StepFailure,
  InsufficientData,
  FitFailure,
  CertificateViolated,
  ConfigError,
  IoError,
};

const char* errc_name(Errc c);

struct Error : std::runtime_error {
  Errc code;
  Error(Errc c, const std::string& msg)
      : std::runtime_error(std::string(errc_name(c)) + ": " + msg), code(c) {}
};

[[noreturn]] inline void fail(Errc c, const std::string& msg) { throw Error(c, msg); }

inline void require(bool ok, Errc c, const std::string& msg) {
  if (!ok) fail(c, msg);
}

}  // namespace mflab
