#pragma once

#include <stdexcept>
#include <string>

namespace seqseg {

// Failure taxonomy shared by all modules. Tests match on code(), humans read
// what().
enum class ErrorCode {
  EmptyLine,
  MalformedWord,
  MalformedMorpheme,
  SchemeMismatch,
  LengthMismatch,
  EmptyInput,
  EmptyCorpus,
  IndexOutOfRange,
  IdOutOfRange,
  ShapeMismatch,
  EmptyLattice,
  NonFiniteLoss,
  NonFiniteGradient,
  InvalidEpoch,
  DuplicateSeeds,
  VersionMismatch,
  CorruptFile,
  IoFailure,
  AlignmentError,
  UsageError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::EmptyLine: return "EmptyLine";
    case ErrorCode::MalformedWord: return "MalformedWord";
    case ErrorCode::MalformedMorpheme: return "MalformedMorpheme";
    case ErrorCode::SchemeMismatch: return "SchemeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::IdOutOfRange: return "IdOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyLattice: return "EmptyLattice";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::InvalidEpoch: return "InvalidEpoch";
    case ErrorCode::DuplicateSeeds: return "DuplicateSeeds";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }

  // The message without the code prefix, for rewrapping with context.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace seqseg
