#include "ppgsqa/errors.hpp"

namespace ppgsqa {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidBand: return "InvalidBand";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::DegenerateSignal: return "DegenerateSignal";
    case ErrorKind::RecordTooShort: return "RecordTooShort";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidMode: return "InvalidMode";
    case ErrorKind::StaleCache: return "StaleCache";
    case ErrorKind::InvalidP: return "InvalidP";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::TooFewSubjects: return "TooFewSubjects";
    case ErrorKind::EmptyFold: return "EmptyFold";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::MalformedFile: return "MalformedFile";
    case ErrorKind::CoverageGap: return "CoverageGap";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::TruncatedBody: return "TruncatedBody";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::RangeError: return "RangeError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace ppgsqa
