#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "termret/http.hpp"
#include "termret/prompting.hpp"

namespace termret {

struct ModelConfig {
  std::string endpoint;  // base URL; requests go to <endpoint>/chat/completions
  std::string model_name;
  double temperature = 0.0;
  bool allow_sampling = false;  // must be set to use temperature != 0
  int max_output_tokens = 256;
  std::chrono::milliseconds request_timeout{120000};
  RetryPolicy retry;
  std::size_t parallelism = 4;

  void validate() const;
};

struct Usage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
  long total_tokens = 0;

  bool operator==(const Usage&) const = default;
};

struct Completion {
  std::string text;
  double latency_ms = 0.0;
  int attempts = 0;
  std::string request_id;
  Usage usage;
};

// One chat-completion request with greedy decoding. Returns the first
// choice's content verbatim.
Completion complete(const PromptBundle& prompt, const ModelConfig& cfg);

// One line of the response log.
struct ResponseRecord {
  std::string query_id;
  std::string prompt_hash;
  std::string raw;
  double latency_ms = 0.0;
  int attempts = 0;
  Usage usage;
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
};

std::string prompt_hash(const PromptBundle& prompt);

struct BatchStats {
  std::size_t requests_issued = 0;
  std::size_t reused = 0;
  std::size_t failed = 0;
};

// Sends every prompt, `parallelism` at a time. Output i belongs to prompt i;
// a failed item carries its error instead of aborting the batch. With a
// previous log, successful records with a matching prompt hash are reused and
// only the rest are sent. Throws EmptyBatch for no prompts.
std::vector<ResponseRecord> run_batch(std::span<const PromptBundle> prompts, const ModelConfig& cfg,
                                      std::span<const ResponseRecord> previous = {}, BatchStats* stats = nullptr);

std::string serialize_responses(std::span<const ResponseRecord> records);
std::vector<ResponseRecord> parse_responses(std::string_view contents);

}  // namespace termret
