#include "termret/error.hpp"

namespace termret {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUnbalancedBrackets: return "UnbalancedBrackets";
    case ErrorKind::kEmptyNode: return "EmptyNode";
    case ErrorKind::kNodeWithoutLabel: return "NodeWithoutLabel";
    case ErrorKind::kMalformedTree: return "MalformedTree";
    case ErrorKind::kTreebankParse: return "TreebankParse";
    case ErrorKind::kDuplicateId: return "DuplicateId";
    case ErrorKind::kDegenerateTree: return "DegenerateTree";
    case ErrorKind::kEmptyMatrix: return "EmptyMatrix";
    case ErrorKind::kEmptyDocument: return "EmptyDocument";
    case ErrorKind::kEmptyCorpus: return "EmptyCorpus";
    case ErrorKind::kDocOutOfRange: return "DocOutOfRange";
    case ErrorKind::kMissingKey: return "MissingKey";
    case ErrorKind::kMalformedLine: return "MalformedLine";
    case ErrorKind::kZeroVector: return "ZeroVector";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kCorruptCache: return "CorruptCache";
    case ErrorKind::kMissingResource: return "MissingResource";
    case ErrorKind::kEmptyScoreVector: return "EmptyScoreVector";
    case ErrorKind::kKExceedsN: return "KExceedsN";
    case ErrorKind::kMissingPlaceholder: return "MissingPlaceholder";
    case ErrorKind::kHttpError: return "HttpError";
    case ErrorKind::kTimeout: return "TimeoutError";
    case ErrorKind::kRetriesExhausted: return "RetriesExhausted";
    case ErrorKind::kContentFilter: return "ContentFilterError";
    case ErrorKind::kEmptyBatch: return "EmptyBatch";
    case ErrorKind::kMisalignedRuns: return "MisalignedRuns";
    case ErrorKind::kUnknownDemoId: return "UnknownDemoId";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kConstantSeries: return "ConstantSeries";
    case ErrorKind::kCorpusMismatch: return "CorpusMismatch";
    case ErrorKind::kConfig: return "ConfigError";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace termret
