#include "postural/error.hpp"

namespace postural {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedFeed: return "MalformedFeed";
    case ErrorCode::UnsupportedSchema: return "UnsupportedSchema";
    case ErrorCode::MalformedTopology: return "MalformedTopology";
    case ErrorCode::DanglingLink: return "DanglingLink";
    case ErrorCode::MalformedAnnotations: return "MalformedAnnotations";
    case ErrorCode::SpanOutOfBounds: return "SpanOutOfBounds";
    case ErrorCode::CorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MalformedModel: return "MalformedModel";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::IllegalEdge: return "IllegalEdge";
    case ErrorCode::WouldOrphanAttacker: return "WouldOrphanAttacker";
    case ErrorCode::MalformedGraph: return "MalformedGraph";
    case ErrorCode::MalformedRules: return "MalformedRules";
    case ErrorCode::CyclicGraph: return "CyclicGraph";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::NoPath: return "NoPath";
    case ErrorCode::StorageFull: return "StorageFull";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::VersionNotFound: return "VersionNotFound";
    case ErrorCode::CorruptDocument: return "CorruptDocument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::VersionConflict: return "VersionConflict";
    case ErrorCode::BadRequest: return "BadRequest";
  }
  return "Unknown";
}

}  // namespace postural
