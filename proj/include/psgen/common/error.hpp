#pragma once

#include <stdexcept>
#include <string>

namespace psgen {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Series whose ratio test fails (effective squeezing lambda >= 1).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Requested subtraction outcome has zero probability (e.g. r = 0 or R = 0).
class ZeroProbabilityError : public Error {
 public:
  using Error::Error;
};

/// Working Fock cutoff too small for the requested accuracy.
class CutoffError : public Error {
 public:
  using Error::Error;
};

/// Quadrature grid does not hold enough probability mass.
class GridMassError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file, config entry or wire frame.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Maximum-likelihood reconstruction cannot proceed (e.g. too many zero-probability records).
class ReconstructionError : public Error {
 public:
  using Error::Error;
};

/// Acquisition-plane failure (HDS integrity, staleness, calibration).
class AcquisitionError : public Error {
 public:
  using Error::Error;
};

/// Delay calibration found no usable correlation peak.
class CalibrationError : public AcquisitionError {
 public:
  using AcquisitionError::AcquisitionError;
};

}  // namespace psgen
