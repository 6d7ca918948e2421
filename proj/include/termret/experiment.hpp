#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "termret/corpus.hpp"
#include "termret/error.hpp"
#include "termret/evaluation.hpp"
#include "termret/llm_client.hpp"
#include "termret/prompting.hpp"
#include "termret/retrieval.hpp"
#include "termret/semantic_sim.hpp"

namespace termret {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// Flat `key = value` experiment configuration. Unknown keys and malformed
// values raise ConfigError.
struct ExperimentConfig {
  std::filesystem::path demo_corpus;
  std::filesystem::path query_corpus;
  std::filesystem::path demo_treebank;
  std::filesystem::path query_treebank;
  RetrievalMethod method = RetrievalMethod::kFastKassim;
  std::size_t k = 10;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4};
  KernelConfig kernel;
  Bm25Params bm25;
  TreeOptions tree_options;

  std::filesystem::path demo_embeddings;
  std::filesystem::path query_embeddings;
  std::string embedding_endpoint;
  std::string embedding_model;
  std::string embedding_instruction = "none";  // none | default | <path>
  std::filesystem::path embedding_cache;

  std::filesystem::path template_path;  // empty: built-in instruction
  DemoOrder demo_order = DemoOrder::kAscending;
  ModelConfig model;

  std::size_t resamples = 10000;
  double ci_level = 0.95;
  std::uint64_t bootstrap_seed = 0;
  std::size_t parallelism = 1;
  std::filesystem::path output = "runs";

  static const std::vector<ConfigKey>& keys();

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  // Sorted `key = value` lines; the basis of the config hash.
  std::string dump() const;
  void validate() const;
};

std::map<std::string, std::string> parse_config_text(std::string_view text);
// Defaults, then the file (if any), then overrides.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::map<std::string, std::string>& overrides);

struct SentenceOutcome {
  std::string query_id;
  std::vector<std::string> predicted;
  std::vector<std::string> gold;
  MatchCounts counts;
  bool llm_failed = false;
  bool empty_output = false;
};

struct RunOutcome {
  std::optional<std::uint64_t> seed;
  std::vector<SentenceOutcome> sentences;
  MatchCounts totals;
  Prf metrics;
  BootstrapCi ci;
  TorReport tor;
  std::optional<double> correlation;  // Spearman of per-query (TOR, F1)
  std::size_t correlation_points = 0;
  std::string correlation_note;
  std::size_t llm_failures = 0;
  std::size_t empty_outputs = 0;
};

struct EvalSettings {
  std::size_t resamples = 10000;
  double ci_level = 0.95;
  std::uint64_t bootstrap_seed = 0;
  std::size_t parallelism = 1;
};

// Scores one run from its retrieval results and raw responses. Missing
// responses count as failed calls (empty prediction).
RunOutcome evaluate_run(std::span<const RetrievalResult> retrieval, std::span<const ResponseRecord> responses,
                        std::span<const SentenceRecord> demos, std::span<const SentenceRecord> queries,
                        const EvalSettings& settings, std::optional<std::uint64_t> seed = {});

struct ExperimentReport {
  RetrievalMethod method = RetrievalMethod::kFastKassim;
  std::size_t k = 0;
  DemoOrder demo_order = DemoOrder::kAscending;
  EvalSettings settings;
  std::vector<RunOutcome> runs;

  Prf mean_metrics() const;
  double mean_tor() const;

  std::string to_json() const;
  // Human-readable summary; percentages are scaled here and nowhere else.
  std::string to_table() const;
};

struct PreparedData {
  std::vector<SentenceRecord> demos;
  std::vector<SentenceRecord> queries;
  std::optional<EmbeddingStore> demo_vectors;
  std::optional<EmbeddingStore> query_vectors;
  std::vector<std::string> warnings;
};

// Loads corpora and the method's resources as named by the config.
PreparedData prepare_data(const ExperimentConfig& config);

// Renders the prompt for each retrieval result (instruction by query domain,
// demonstrations in the configured order).
std::vector<PromptBundle> build_prompts(std::span<const RetrievalResult> retrieval,
                                        std::span<const SentenceRecord> demos,
                                        std::span<const SentenceRecord> queries, std::string_view instruction_template,
                                        DemoOrder order);

std::string serialize_prompts(std::span<const PromptBundle> prompts);
std::vector<PromptBundle> parse_prompts(std::string_view contents);

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path report_json;
  std::filesystem::path report_text;
  std::filesystem::path manifest;
};

// File stem for one run's artifacts: the method, plus the seed for random runs.
std::string run_tag(RetrievalMethod method, std::optional<std::uint64_t> seed);

struct RunOptions {
  // Reuse the responses already logged in this run directory instead of
  // (re)sending prompts; items missing from the log are sent unless
  // skip_llm is set.
  std::optional<std::filesystem::path> resume_dir;
  bool skip_llm = false;
};

// Full pipeline: retrieval, prompts, model calls, evaluation. Every stage's
// output is written under <output>/run-<timestamp>/ (or resume_dir).
ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {},
                                RunPaths* paths = nullptr);

// Recomputes the report offline from a run directory's retrieval dumps and
// response logs.
ExperimentReport evaluate_run_dir(const ExperimentConfig& config, const std::filesystem::path& run_dir);

struct Comparison {
  double f1_a = 0.0;
  double f1_b = 0.0;
  double p_value = 1.0;
  bool significant = false;  // p < 0.05
  std::size_t sentences = 0;
};

// Paired bootstrap on per-sentence counts read from two report JSON files
// (run index selects a seed for multi-run reports). Throws CorpusMismatch
// when the query id sets differ.
Comparison compare_reports(std::string_view report_a_json, std::string_view report_b_json,
                           std::size_t resamples = 10000, std::uint64_t seed = 0, std::size_t run_a = 0,
                           std::size_t run_b = 0);

std::string comparison_json(const Comparison& c);

// Exit code for an error kind: 1 config, 2 data, 3 upstream service.
int exit_code_for(ErrorKind kind);

}  // namespace termret
