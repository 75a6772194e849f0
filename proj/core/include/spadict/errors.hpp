#pragma once

#include <stdexcept>
#include <string>

namespace spadict {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape disagreement between operands or between a file and its manifest.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or corrupt on-disk data (bad magic, truncated payload, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A factorization or eigensolver failed even after regularization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// No allocation satisfies the budget and the per-layer caps.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument supplied by a caller (out-of-range target, bad grid, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Prefixes `message` with the layer name when one is known.
std::string with_layer(const std::string& layer, const std::string& message);

}  // namespace spadict
