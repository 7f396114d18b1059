// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#pragma once

#include <stdexcept>
#include <string>

namespace expertmap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input could not be parsed (bad CSV/JSON syntax). The message carries the
/// line or byte position.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input parsed but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Trace, profile and mapping disagree on expert or GPU counts.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Synthetic generation could not satisfy its spec.
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace expertmap
