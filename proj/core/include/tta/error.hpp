#pragma once

#include <stdexcept>

namespace tta {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A caller passed inconsistent data (shape mismatch, bad index, ...).
struct ArgumentError : Error {
  using Error::Error;
};

/// A configuration value is out of its legal range.
struct ConfigError : Error {
  using Error::Error;
};

/// A computation produced a non-finite intermediate.
struct NumericError : Error {
  using Error::Error;
};

/// A stream or weights file is malformed.
struct FormatError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

/// A metric is undefined for the given inputs (e.g. single-class labels).
struct MetricError : Error {
  using Error::Error;
};

}  // namespace tta
