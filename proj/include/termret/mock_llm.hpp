#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "termret/corpus.hpp"

namespace termret {

enum class MockMode {
  kGoldEcho,       // answers with the query's gold terms (looked up by sentence)
  kNoTerm,         // always "No term"
  kLastDemoEcho,   // repeats the Terms: line of the last demonstration
  kFirstDemoEcho,  // repeats the Terms: line of the first demonstration
  kFixed,          // always `fixed_text`
};

MockMode parse_mock_mode(std::string_view name);

struct MockLlmOptions {
  MockMode mode = MockMode::kNoTerm;
  std::string fixed_text;
  std::vector<SentenceRecord> queries;  // for kGoldEcho
  std::size_t embedding_dim = 16;
};

// The reply the mock gives for one prompt.
std::string mock_completion(const MockLlmOptions& options, std::string_view prompt);

// Deterministic bag-of-words vector (hashed, L2 != 0) for /embeddings.
std::vector<double> mock_embedding(std::string_view text, std::size_t dim);

// OpenAI-compatible stub serving POST <prefix>/chat/completions and
// <prefix>/embeddings on 127.0.0.1. Starts listening in the constructor.
class MockLlmServer {
 public:
  explicit MockLlmServer(MockLlmOptions options, int port = 0, std::string prefix = "/v1");
  ~MockLlmServer();
  MockLlmServer(const MockLlmServer&) = delete;
  MockLlmServer& operator=(const MockLlmServer&) = delete;

  int port() const { return port_; }
  std::string base_url() const;
  std::size_t requests_served() const { return served_.load(); }
  void stop();
  // Blocks until stop() is called from elsewhere (or the process ends).
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string prefix_;
  int port_ = 0;
  std::atomic<std::size_t> served_{0};
  std::thread thread_;
};

}  // namespace termret
