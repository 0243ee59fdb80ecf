#pragma once

#include <stdexcept>
#include <string>

namespace projscan {

/// Base class for all projscan errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed, unsupported, or truncated file content.
class FormatError : public Error {
public:
  using Error::Error;
};

/// Data violates a value-level invariant (non-finite voxels, bad labels).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A target grid dimension is smaller than the input dimension.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Tensor or channel-layout shapes do not agree.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// An argument is outside its documented domain.
class ParameterError : public Error {
public:
  using Error::Error;
};

/// An operation was called before the state it relies on exists
/// (e.g. backward without a cached forward pass).
class StateError : public Error {
public:
  using Error::Error;
};

/// Inconsistent or unsatisfiable configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
public:
  using Error::Error;
};

/// An ablation sweep is incomplete or inconsistent with its manifest.
class SweepError : public Error {
public:
  using Error::Error;
};

} // namespace projscan
