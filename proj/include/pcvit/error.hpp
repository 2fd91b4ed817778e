#pragma once

#include <stdexcept>
#include <string>

namespace pcvit {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit together.
struct ShapeError : Error {
  using Error::Error;
};

/// An argument outside the domain of an operation.
struct ValueError : Error {
  using Error::Error;
};

/// A NaN or infinity surfaced from a numeric operation.
struct NonFiniteError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

/// Malformed on-disk data (tensor files, manifests, reports, configs).
struct FormatError : Error {
  using Error::Error;
};

struct VersionMismatchError : FormatError {
  using FormatError::FormatError;
};

struct TruncatedFileError : FormatError {
  using FormatError::FormatError;
};

struct UnknownTensorError : FormatError {
  using FormatError::FormatError;
};

struct CorpusLayoutError : Error {
  using Error::Error;
};

}  // namespace pcvit
