#pragma once

#include <stdexcept>
#include <string>

namespace advrobust {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// p <= 1, or a norm exponent outside the supported range.
class InvalidNorm : public Error {
 public:
  using Error::Error;
};

/// Norm supported in general but not by a particular solver.
class UnsupportedNorm : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

/// The attack (and hence the robust margin) is undefined for w = 0.
class ZeroWeight : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Lower-bound family construction could not be completed numerically.
class ConstructionFailure : public Error {
 public:
  using Error::Error;
};

/// A point that does not lie on any canonical family segment.
class MalformedSample : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration rejected before any work is done.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace advrobust
