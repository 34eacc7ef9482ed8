#pragma once

#include <stdexcept>
#include <string>

namespace evsynth {

// Base for all library errors so callers can catch everything in one place.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed serialized bytes/text: bad magic, truncation, unparseable fields.
struct FormatError : Error {
  using Error::Error;
};

// Tensor/image dimension mismatches and invalid shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid configuration values (even quantization levels, zero-length windows, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem-level failures: missing files, unwritable paths.
struct IoError : Error {
  using Error::Error;
};

// Content violations in otherwise well-formed data: unsorted event streams,
// out-of-bounds coordinates, mismatched sequence lengths.
struct DataError : Error {
  using Error::Error;
};

// Numeric failures that abort a computation: non-finite losses, failed
// gradient verification.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace evsynth
