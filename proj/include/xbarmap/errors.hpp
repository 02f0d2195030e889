/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace xbarmap {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Incompatible or invalid matrix/layer dimensions.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Invalid numeric input (non-finite values, out-of-range parameters).
class InputError : public Error {
public:
  using Error::Error;
};

/// API misuse, e.g. backward pass without a cached forward pass.
class StateError : public Error {
public:
  using Error::Error;
};

/// Malformed data file (IDX, CSV).
class FormatError : public Error {
public:
  using Error::Error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Unreadable or schema-incompatible checkpoint.
class CheckpointError : public Error {
public:
  using Error::Error;
};

/// Metrics cannot be grouped for a cross-scheme comparison.
class ComparisonError : public Error {
public:
  using Error::Error;
};

} // namespace xbarmap
