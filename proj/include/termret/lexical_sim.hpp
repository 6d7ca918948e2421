#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace termret {

// Lowercases, splits on whitespace, strips leading/trailing punctuation from
// each token and drops empty tokens. Internal punctuation (hyphens) is kept.
std::vector<std::string> tokenize(std::string_view text);

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
  bool dedupe_query_terms = true;
};

class Bm25Index {
 public:
  // Throws EmptyCorpus for an empty corpus and ConfigError for bad k1/b.
  static Bm25Index build(std::span<const std::vector<std::string>> corpus, Bm25Params params = {});

  std::size_t num_docs() const { return doc_lengths_.size(); }
  double avg_doc_length() const { return avg_doc_length_; }
  const std::vector<std::size_t>& doc_lengths() const { return doc_lengths_; }
  std::size_t doc_freq(const std::string& term) const;
  std::size_t term_freq(std::size_t doc, const std::string& term) const;
  const Bm25Params& params() const { return params_; }

  double idf(const std::string& term) const;
  // Okapi BM25 with the ln(1 + ...) idf. Throws DocOutOfRange.
  double score(std::span<const std::string> query, std::size_t doc) const;
  std::vector<double> score_all(std::span<const std::string> query) const;

  // Deterministic text form (sorted terms) used for caching and diffing.
  std::string serialize() const;

 private:
  Bm25Params params_;
  std::vector<std::map<std::string, std::size_t>> doc_term_freqs_;
  std::vector<std::size_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
  std::map<std::string, std::size_t> doc_freq_;
};

}  // namespace termret
