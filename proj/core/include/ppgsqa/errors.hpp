#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ppgsqa {

enum class ErrorKind {
  InvalidBand,
  NonFinite,
  DegenerateSignal,
  RecordTooShort,
  ShapeMismatch,
  InvalidMode,
  StaleCache,
  InvalidP,
  InvalidConfig,
  SingleClass,
  EmptyInput,
  TooFewSubjects,
  EmptyFold,
  EmptyDataset,
  MalformedFile,
  CoverageGap,
  VersionMismatch,
  TruncatedBody,
  IoFailure,
  RangeError,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a machine-checkable kind so the
// CLI can map it onto an exit code and tests can assert the exact failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace ppgsqa
