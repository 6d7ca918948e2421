#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "termret/treebank.hpp"

namespace termret {

enum class Split { kTrain, kValidation, kTest };

std::string_view to_string(Split split);

struct SentenceRecord {
  std::string id;
  std::string text;
  std::string domain;
  std::vector<std::string> terms;  // gold term set in corpus order, no duplicates
  std::optional<ParseTree> tree;
  std::optional<Split> split;

  bool operator==(const SentenceRecord&) const = default;
};

struct Corpus {
  std::vector<SentenceRecord> records;
  std::size_t duplicate_terms_removed = 0;
  std::size_t empty_terms_removed = 0;
  // Gold terms containing a comma; the comma-separated answer protocol cannot
  // represent them, so they are left out of rendered demonstrations.
  std::size_t comma_terms = 0;
};

// JSON lines with keys id, text, domain, terms and optional split. Throws
// MalformedLine, MissingKey or DuplicateId with the offending line number.
Corpus parse_corpus(std::string_view contents);
Corpus load_corpus(const std::filesystem::path& path);

std::string serialize_corpus(std::span<const SentenceRecord> records);

// One warning per gold term that is not a case-sensitive substring of the text.
std::vector<std::string> check_term_containment(const SentenceRecord& record);

// Attaches trees by sentence id; returns the ids that had no tree.
std::vector<std::string> attach_trees(std::vector<SentenceRecord>& records, const Treebank& treebank);

struct CorpusStats {
  std::size_t n_sentences = 0;
  std::size_t total_words = 0;
  std::size_t total_terms = 0;
  double avg_words = 0.0;
  double avg_terms = 0.0;

  long rounded_words() const;
  long rounded_terms() const;
};

// Word counts use the retrieval tokenizer. Throws EmptyCorpus.
CorpusStats corpus_stats(std::span<const SentenceRecord> records);

std::string stats_json(const CorpusStats& stats);
std::string stats_table(std::span<const std::pair<std::string, CorpusStats>> rows);

}  // namespace termret
