#pragma once

#include <stdexcept>
#include <string>

namespace gspwl {

/// Base class of all library exceptions.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or input data (bad files, bad dimensions, bad
/// models).  CLI maps this family to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

/// Numerical failure during an otherwise valid computation (singular
/// systems, spectra outside the declared interval).  CLI maps this family
/// to exit code 3.
struct NumericalError : Error {
  using Error::Error;
};

struct DimensionMismatch : ConfigError {
  using ConfigError::ConfigError;
};

/// Edge list specifies conflicting or repeated weights for an undirected pair.
struct NonSymmetric : ConfigError {
  using ConfigError::ConfigError;
};

struct EmptyDataset : ConfigError {
  using ConfigError::ConfigError;
};

/// Model description violates its structural requirements.
struct InvalidModel : ConfigError {
  using ConfigError::ConfigError;
};

struct InvalidInterval : ConfigError {
  using ConfigError::ConfigError;
};

/// Matrix required to be unitary (and symmetric where stated) is not.
struct NotUnitary : ConfigError {
  using ConfigError::ConfigError;
};

struct DisconnectedGraph : NumericalError {
  using NumericalError::NumericalError;
};

/// A frequency-domain power diagonal is zero to working precision.
struct SingularSpectrum : NumericalError {
  using NumericalError::NumericalError;
};

struct SingularCovariance : NumericalError {
  using NumericalError::NumericalError;
};

/// Schur complement of the observation covariance is singular.
struct SingularSchur : NumericalError {
  using NumericalError::NumericalError;
};

/// Rational filter denominator vanishes at a requested evaluation point.
struct PoleOnSpectrum : NumericalError {
  using NumericalError::NumericalError;
};

/// Declared Chebyshev interval does not cover the operator spectrum.
struct IntervalTooSmall : NumericalError {
  using NumericalError::NumericalError;
};

/// Topology perturbation could not preserve connectivity.
struct DisconnectionRisk : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace gspwl
