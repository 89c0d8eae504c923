/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace survfuse {

enum class ErrorKind {
  kArgument,
  kValidation,
  kNumeric,
  kSingular,
  kPositivity,
  kNotIdentified,
  kFit,
  kRange,
  kEmptySource,
  kInsufficientData,
  kIo,
  kReportInvalid,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for every failure raised by the library. The kind drives
/// the C API status code and the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Validation failure carrying the 1-based data row numbers that were rejected.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::size_t> rows)
      : Error(ErrorKind::kValidation, what), rows_(std::move(rows)) {}
  const std::vector<std::size_t>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::size_t> rows_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace survfuse
