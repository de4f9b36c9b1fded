// Copyright (c) 2026, The randvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "randvit/error.hpp"

namespace randvit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonDivisibleImage: return "NonDivisibleImage";
    case ErrorKind::EmptySample: return "EmptySample";
    case ErrorKind::OutOfBounds: return "OutOfBounds";
    case ErrorKind::BadDim: return "BadDim";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::EmptySplit: return "EmptySplit";
    case ErrorKind::NonStochasticInput: return "NonStochasticInput";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::BadCheckpoint: return "BadCheckpoint";
    case ErrorKind::BadImage: return "BadImage";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadConfig:
    case ErrorKind::BadDim:
      return 2;
    case ErrorKind::NonFiniteGradient:
    case ErrorKind::NonStochasticInput:
    case ErrorKind::DivisionByZero:
      return 4;
    default:
      return 3;
  }
}

}  // namespace randvit
