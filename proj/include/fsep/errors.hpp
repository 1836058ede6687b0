#pragma once

#include <stdexcept>
#include <string>

namespace fsep {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Attitude too close to the Euler-angle singularity (|theta| -> pi/2).
class SingularAttitude : public Error {
 public:
  using Error::Error;
};

/// Integration step too coarse for the exact motor-lag discretization.
class StepTooLarge : public Error {
 public:
  using Error::Error;
};

/// The admissible excitation band is empty for the current trajectory.
class EmptyEnvelope : public Error {
 public:
  using Error::Error;
};

class DivisionByZero : public Error {
 public:
  using Error::Error;
};

/// Measured steady-state amplitude exceeds what a unity-gain lag can deliver.
class InconsistentResponse : public Error {
 public:
  using Error::Error;
};

/// Observer gains would make the estimation error dynamics unstable.
class GainConditionViolated : public Error {
 public:
  using Error::Error;
};

/// A simulated state left the physically meaningful range; the run is aborted.
class NumericalDivergence : public Error {
 public:
  using Error::Error;
};

class EmptySeries : public Error {
 public:
  using Error::Error;
};

/// Invalid scenario file, unknown key or malformed override.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsep
