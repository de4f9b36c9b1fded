// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace randvit {

enum class ErrorKind {
  NonDivisibleImage,
  EmptySample,
  OutOfBounds,
  BadDim,
  ShapeMismatch,
  NonFiniteGradient,
  EmptySplit,
  NonStochasticInput,
  DivisionByZero,
  SchemaMismatch,
  TruncatedFile,
  BadCheckpoint,
  BadImage,
  BadConfig,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// CLI exit code for an error kind: 2 config, 3 data, 4 numeric.
int exit_code_for(ErrorKind kind);

}  // namespace randvit
