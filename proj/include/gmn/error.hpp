// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gmn {

enum class ErrorKind {
  IndexOutOfRange,
  DuplicateSelfLoop,
  FeatureRowMismatch,
  InvalidParams,
  ParseError,
  VersionMismatch,
  ConvergenceFailure,
  DimensionError,
  InvalidPermutation,
  ShapeMismatch,
  DivByZero,
  NonFinite,
  UnsupportedSpec,
  AxisError,
  DetachedOutput,
  TypeConstraintViolation,
  ConfigMismatch,
  DivergenceDetected,
  PairNotWLEquivalent,
  UnknownKey,
  InvalidValue,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::DuplicateSelfLoop: return "DuplicateSelfLoop";
    case ErrorKind::FeatureRowMismatch: return "FeatureRowMismatch";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::DimensionError: return "DimensionError";
    case ErrorKind::InvalidPermutation: return "InvalidPermutation";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DivByZero: return "DivByZero";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::UnsupportedSpec: return "UnsupportedSpec";
    case ErrorKind::AxisError: return "AxisError";
    case ErrorKind::DetachedOutput: return "DetachedOutput";
    case ErrorKind::TypeConstraintViolation: return "TypeConstraintViolation";
    case ErrorKind::ConfigMismatch: return "ConfigMismatch";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::PairNotWLEquivalent: return "PairNotWLEquivalent";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::InvalidValue: return "InvalidValue";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; `kind()` tells callers what failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// what() without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace gmn
