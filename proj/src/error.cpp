#include "rpl/error.hpp"

namespace rpl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownParent: return "UnknownParent";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::MissingClaim: return "MissingClaim";
    case ErrorCode::BadTimestamp: return "BadTimestamp";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NotScalarOutput: return "NotScalarOutput";
    case ErrorCode::ClaimTooLong: return "ClaimTooLong";
    case ErrorCode::BadTemplate: return "BadTemplate";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyWordSet: return "EmptyWordSet";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& subject,
                    const std::string& detail) {
  std::string msg(to_string(code));
  if (!subject.empty()) msg += " [" + subject + "]";
  if (!detail.empty()) msg += ": " + detail;
  return msg;
}

}  // namespace

Error::Error(ErrorCode code, std::string subject, const std::string& detail)
    : std::runtime_error(compose(code, subject, detail)),
      code_(code),
      subject_(std::move(subject)) {}

}  // namespace rpl
