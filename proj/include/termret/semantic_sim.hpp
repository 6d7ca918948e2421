#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "termret/http.hpp"

namespace termret {

// dot(u, v) / (|u| |v|). Throws DimensionMismatch or ZeroVector.
double cosine(std::span<const double> u, std::span<const double> v);

class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::size_t dim, std::string model_tag, std::optional<std::string> instruction = {});

  // Rejects vectors of the wrong length (DimensionMismatch) and NaN/Inf
  // components (InvalidArgument). The first vector fixes dim when it is 0.
  void add(const std::string& id, std::vector<double> vector);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool empty() const { return vectors_.empty(); }
  bool contains(const std::string& id) const { return vectors_.count(id) > 0; }
  const std::vector<double>& at(const std::string& id) const;
  const std::string& model_tag() const { return model_tag_; }
  const std::optional<std::string>& instruction() const { return instruction_; }
  const std::map<std::string, std::vector<double>>& vectors() const { return vectors_; }

  bool operator==(const EmbeddingStore&) const = default;

 private:
  std::size_t dim_ = 0;
  std::string model_tag_;
  std::optional<std::string> instruction_;
  std::map<std::string, std::vector<double>> vectors_;
};

// Cache file: `dim=<d> model=<tag>[ instruction=<json string>]`, then one
// `<id>\t<components>` line per vector, then `checksum=<sha256>` over all
// preceding bytes.
std::string serialize_embeddings(const EmbeddingStore& store);
EmbeddingStore parse_embeddings(std::string_view contents);  // CorruptCache on damage
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore load_embeddings(const std::filesystem::path& path);

struct EmbeddingClientConfig {
  std::string endpoint;  // base URL; requests go to <endpoint>/embeddings
  std::string model;
  std::size_t batch_size = 32;
  std::size_t parallelism = 4;
  std::chrono::milliseconds timeout{60000};
  RetryPolicy retry;
};

struct EmbeddingInput {
  std::string id;
  std::string text;
  std::string domain;  // substituted into the instruction's [DOMAIN_NAME]
};

// Text actually sent for one input: the rendered instruction, a space, then
// the sentence; just the sentence when there is no instruction.
std::string embedding_text(const EmbeddingInput& input, const std::optional<std::string>& instruction);

// Embeds all inputs through an OpenAI-style /embeddings endpoint. Batches run
// concurrently; the store is assembled in input order.
EmbeddingStore fetch_embeddings(std::span<const EmbeddingInput> inputs, const EmbeddingClientConfig& cfg,
                                const std::optional<std::string>& instruction = std::nullopt);

// Content-addressed cache keyed by (model, instruction, text), persisted in the
// embedding file format with the key as the id column.
class EmbeddingCache {
 public:
  static std::string key(const std::string& model, const std::optional<std::string>& instruction,
                         const std::string& text);

  explicit EmbeddingCache(std::string model) : store_(0, std::move(model)) {}
  static EmbeddingCache load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::vector<double>* find(const std::string& key) const;
  void put(const std::string& key, std::vector<double> vector) { store_.add(key, std::move(vector)); }
  std::size_t size() const { return store_.size(); }
  const std::string& model() const { return store_.model_tag(); }

 private:
  explicit EmbeddingCache(EmbeddingStore store) : store_(std::move(store)) {}
  EmbeddingStore store_;
};

// Fetches only inputs missing from the cache, then fills the cache.
EmbeddingStore fetch_embeddings_cached(std::span<const EmbeddingInput> inputs, const EmbeddingClientConfig& cfg,
                                       const std::optional<std::string>& instruction, EmbeddingCache& cache);

}  // namespace termret
