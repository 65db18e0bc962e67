// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace flowinv {

/// Invalid parameters, schemas, or inputs detected before any computation.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operands whose shapes are incompatible for the requested operation.
class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Malformed or unreadable input file (mask, checkpoint, CSV).
class FormatError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// A non-finite value or a diverging iteration during computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Attention tape misuse: duplicate writes or reads of missing entries.
class TapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure writing an output file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flowinv
