#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rpl {

enum class ErrorCode {
  // event parsing / tree validation
  ParseError,
  DuplicateId,
  UnknownParent,
  CycleDetected,
  MissingClaim,
  BadTimestamp,
  UnknownNode,
  // tensors
  ShapeMismatch,
  NotScalarOutput,
  // encoder / objectives
  ClaimTooLong,
  BadTemplate,
  BadConfig,
  ZeroVector,
  EmptyWordSet,
  // training / evaluation
  NonFiniteLoss,
  EmptyDataset,
  SingleClassDataset,
  BadCheckpoint,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library. `subject()` names the offending
// entity (a post id, a shape pair, a batch id...) when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string subject, const std::string& detail = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorCode code_;
  std::string subject_;
};

}  // namespace rpl
