#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace postural {

enum class ErrorCode {
  // ingest
  MalformedFeed,
  UnsupportedSchema,
  MalformedTopology,
  DanglingLink,
  // extraction
  MalformedAnnotations,
  SpanOutOfBounds,
  // semantics
  CorpusTooSmall,
  DimensionMismatch,
  MalformedModel,
  // graph
  EmptyInput,
  UnknownNode,
  IllegalEdge,
  WouldOrphanAttacker,
  MalformedGraph,
  MalformedRules,
  // risk
  CyclicGraph,
  EmptyGraph,
  NoPath,
  // store
  StorageFull,
  ChecksumMismatch,
  NotFound,
  VersionNotFound,
  CorruptDocument,
  IoError,
  // api
  VersionConflict,
  BadRequest,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI and HTTP layers can map it to an exit status or a problem document.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace postural
