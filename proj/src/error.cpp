/*
 * Copyright 2026 The survfuse Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "survfuse/error.hpp"

namespace survfuse {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kArgument: return "argument";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kSingular: return "singular";
    case ErrorKind::kPositivity: return "positivity";
    case ErrorKind::kNotIdentified: return "not-identified";
    case ErrorKind::kFit: return "fit";
    case ErrorKind::kRange: return "range";
    case ErrorKind::kEmptySource: return "empty-source";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kReportInvalid: return "report-invalid";
  }
  return "unknown";
}

}  // namespace survfuse
