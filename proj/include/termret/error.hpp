#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace termret {

enum class ErrorKind {
  // treebank
  kUnbalancedBrackets,
  kEmptyNode,
  kNodeWithoutLabel,
  kMalformedTree,
  kTreebankParse,
  kDuplicateId,
  // syntax_sim
  kDegenerateTree,
  kEmptyMatrix,
  kEmptyDocument,
  // lexical_sim / corpus
  kEmptyCorpus,
  kDocOutOfRange,
  kMissingKey,
  kMalformedLine,
  // semantic_sim
  kZeroVector,
  kDimensionMismatch,
  kCorruptCache,
  // retrieval
  kMissingResource,
  kEmptyScoreVector,
  kKExceedsN,
  // prompting
  kMissingPlaceholder,
  // http / llm
  kHttpError,
  kTimeout,
  kRetriesExhausted,
  kContentFilter,
  kEmptyBatch,
  // evaluation
  kMisalignedRuns,
  kUnknownDemoId,
  kLengthMismatch,
  kConstantSeries,
  kCorpusMismatch,
  // general
  kConfig,
  kIo,
  kInvalidArgument,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace termret
