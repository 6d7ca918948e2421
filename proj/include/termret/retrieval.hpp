#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "termret/corpus.hpp"
#include "termret/lexical_sim.hpp"
#include "termret/method.hpp"
#include "termret/semantic_sim.hpp"
#include "termret/syntax_sim.hpp"

namespace termret {

// Random selection uses std::mt19937_64 (sequence fixed by the C++ standard)
// with rejection-sampled bounded draws, so seeds reproduce everywhere.
inline constexpr std::string_view kRandomGenerator = "mt19937_64+rejection/v1";

struct ScoredDemo {
  std::string demo_id;
  double score = 0.0;

  bool operator==(const ScoredDemo&) const = default;
};

struct RetrievalResult {
  std::string query_id;
  RetrievalMethod method = RetrievalMethod::kFastKassim;
  std::size_t k = 0;
  std::vector<ScoredDemo> selected;  // best first
  std::optional<std::uint64_t> seed;  // random method only

  bool operator==(const RetrievalResult&) const = default;
};

struct TopK {
  std::vector<std::size_t> indices;
  bool clamped = false;  // k exceeded the number of scores
};

// Indices of the k largest scores, best first; ties go to the lower index.
TopK top_k(std::span<const double> scores, std::size_t k);

// k distinct indices drawn uniformly without replacement. Throws KExceedsN.
std::vector<std::size_t> random_select(std::size_t n, std::size_t k, std::uint64_t seed);

struct RetrievalOptions {
  KernelConfig kernel;
  Bm25Params bm25;
  const EmbeddingStore* demo_embeddings = nullptr;
  const EmbeddingStore* query_embeddings = nullptr;
  std::size_t parallelism = 1;
};

// Holds the per-corpus state for one method (BM25 index, checked trees or
// vectors) so many queries can be scored against the same demonstrations.
class Retriever {
 public:
  // Throws MissingResource naming every demonstration lacking what the
  // method needs.
  Retriever(std::span<const SentenceRecord> demos, RetrievalMethod method, RetrievalOptions options = {});

  RetrievalMethod method() const { return method_; }
  std::size_t num_demos() const { return demos_.size(); }

  // One score per demonstration, higher is more similar. Not defined for the
  // random method.
  std::vector<double> score(const SentenceRecord& query) const;

  // Top-k (or seeded random) selection. `clamped` is set when k > corpus size.
  RetrievalResult retrieve(const SentenceRecord& query, std::size_t k, std::optional<std::uint64_t> seed = {},
                           bool* clamped = nullptr) const;

 private:
  std::span<const SentenceRecord> demos_;
  RetrievalMethod method_;
  RetrievalOptions options_;
  std::optional<Bm25Index> bm25_;
  std::vector<const ParseTree*> demo_trees_;
  std::vector<double> demo_self_kernels_;
};

std::vector<double> score_all(const SentenceRecord& query, std::span<const SentenceRecord> demos,
                              RetrievalMethod method, const RetrievalOptions& options = {});

// Retrieves for every query; queries run concurrently and results keep query
// order. Returns the number of queries whose k had to be clamped.
std::vector<RetrievalResult> retrieve_all(std::span<const SentenceRecord> queries, const Retriever& retriever,
                                          std::size_t k, std::optional<std::uint64_t> seed,
                                          std::size_t parallelism, std::size_t* clamped_count = nullptr);

// JSON lines, one result per line.
std::string serialize_retrieval(std::span<const RetrievalResult> results);
std::vector<RetrievalResult> parse_retrieval(std::string_view contents);

// `<query-id>\t<demo-id>\t<method>\t<score>` per line.
struct ScoreRecord {
  std::string query_id;
  std::string demo_id;
  RetrievalMethod method = RetrievalMethod::kFastKassim;
  double score = 0.0;

  bool operator==(const ScoreRecord&) const = default;
};
std::string serialize_score_cache(std::span<const ScoreRecord> records);
std::vector<ScoreRecord> parse_score_cache(std::string_view contents);

}  // namespace termret
