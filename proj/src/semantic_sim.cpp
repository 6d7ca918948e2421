#include "termret/semantic_sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <charconv>

#include "termret/error.hpp"
#include "termret/util.hpp"

namespace termret {

using nlohmann::json;

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "vectors of length " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (!(nu > 0.0) || !(nv > 0.0)) throw Error(ErrorKind::kZeroVector, "cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

EmbeddingStore::EmbeddingStore(std::size_t dim, std::string model_tag, std::optional<std::string> instruction)
    : dim_(dim), model_tag_(std::move(model_tag)), instruction_(std::move(instruction)) {}

void EmbeddingStore::add(const std::string& id, std::vector<double> vector) {
  if (id.empty() || id.find_first_of("\t\n\r") != std::string::npos) {
    throw Error(ErrorKind::kInvalidArgument, "embedding id must be non-empty without tabs or newlines");
  }
  if (vector.empty()) throw Error(ErrorKind::kDimensionMismatch, "empty embedding for " + id);
  if (dim_ == 0 && vectors_.empty()) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw Error(ErrorKind::kDimensionMismatch, "embedding for " + id + " has length " +
                                                   std::to_string(vector.size()) + ", store dim is " +
                                                   std::to_string(dim_));
  }
  for (double x : vector) {
    if (!std::isfinite(x)) throw Error(ErrorKind::kInvalidArgument, "non-finite component in embedding for " + id);
  }
  vectors_[id] = std::move(vector);
}

const std::vector<double>& EmbeddingStore::at(const std::string& id) const {
  const auto it = vectors_.find(id);
  if (it == vectors_.end()) throw Error(ErrorKind::kMissingResource, "no embedding for " + id);
  return it->second;
}

std::string serialize_embeddings(const EmbeddingStore& store) {
  if (store.model_tag().empty() || store.model_tag().find_first_of(" \t\n\r") != std::string::npos) {
    throw Error(ErrorKind::kInvalidArgument, "model tag must be non-empty without whitespace");
  }
  std::string out = "dim=" + std::to_string(store.dim()) + " model=" + store.model_tag();
  if (store.instruction()) out += " instruction=" + json(*store.instruction()).dump();
  out += "\n";
  for (const auto& [id, vec] : store.vectors()) {
    out += id;
    out.push_back('\t');
    for (std::size_t i = 0; i < vec.size(); ++i) {
      if (i) out.push_back(' ');
      out += format_real(vec[i]);
    }
    out.push_back('\n');
  }
  out += "checksum=" + sha256_hex(out) + "\n";
  return out;
}

EmbeddingStore parse_embeddings(std::string_view contents) {
  auto corrupt = [](const std::string& why) { return Error(ErrorKind::kCorruptCache, why); };
  const auto marker = contents.rfind("checksum=");
  if (marker == std::string_view::npos || (marker != 0 && contents[marker - 1] != '\n')) {
    throw corrupt("missing checksum line");
  }
  const auto body = contents.substr(0, marker);
  const auto stated = trim(contents.substr(marker + 9));
  if (stated != sha256_hex(body)) throw corrupt("checksum mismatch");

  auto lines = split(body, '\n');
  if (lines.empty() || lines.front().empty()) throw corrupt("missing header");
  const std::string_view header = lines.front();
  if (!header.starts_with("dim=")) throw corrupt("bad header");
  const auto model_pos = header.find(" model=");
  if (model_pos == std::string_view::npos) throw corrupt("header lacks model");
  std::size_t dim = 0;
  {
    const auto dim_text = header.substr(4, model_pos - 4);
    auto [p, ec] = std::from_chars(dim_text.data(), dim_text.data() + dim_text.size(), dim);
    if (ec != std::errc() || p != dim_text.data() + dim_text.size()) throw corrupt("bad dim");
  }
  auto rest = header.substr(model_pos + 7);
  std::optional<std::string> instruction;
  const auto instr_pos = rest.find(" instruction=");
  std::string model(rest.substr(0, instr_pos));
  if (instr_pos != std::string_view::npos) {
    try {
      instruction = json::parse(rest.substr(instr_pos + 13)).get<std::string>();
    } catch (const json::exception&) {
      throw corrupt("bad instruction field");
    }
  }
  EmbeddingStore store(dim, model, instruction);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw corrupt("line " + std::to_string(i + 1) + " lacks a tab");
    std::vector<double> vec;
    vec.reserve(dim);
    for (auto piece : split(line.substr(tab + 1), ' ')) {
      double x = 0;
      auto [p, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), x);
      if (ec != std::errc() || p != piece.data() + piece.size()) {
        throw corrupt("bad number on line " + std::to_string(i + 1));
      }
      vec.push_back(x);
    }
    if (vec.size() != dim) throw corrupt("wrong vector length on line " + std::to_string(i + 1));
    store.add(std::string(line.substr(0, tab)), std::move(vec));
  }
  return store;
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  write_file(path, serialize_embeddings(store));
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) { return parse_embeddings(read_file(path)); }

std::string embedding_text(const EmbeddingInput& input, const std::optional<std::string>& instruction) {
  if (!instruction) return input.text;
  return replace_all(*instruction, "[DOMAIN_NAME]", domain_display_name(input.domain)) + " " + input.text;
}

namespace {

std::vector<std::vector<double>> request_batch(const HttpTarget& target, const EmbeddingClientConfig& cfg,
                                               const std::vector<std::string>& texts) {
  json request = {{"model", cfg.model}, {"input", texts}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (auto key = api_key_from_env(); !key.empty()) headers.emplace_back("Authorization", "Bearer " + key);
  const HttpReply reply = post_json(target, "/embeddings", request.dump(), headers, cfg.timeout, cfg.retry);

  json response;
  try {
    response = json::parse(reply.body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kHttpError, std::string("embedding response is not JSON: ") + e.what());
  }
  if (!response.contains("data") || !response["data"].is_array()) {
    throw Error(ErrorKind::kHttpError, "embedding response lacks a data array");
  }
  const auto& data = response["data"];
  if (data.size() != texts.size()) {
    throw Error(ErrorKind::kHttpError, "embedding response has " + std::to_string(data.size()) +
                                           " vectors for " + std::to_string(texts.size()) + " inputs");
  }
  std::vector<std::vector<double>> out(texts.size());
  std::vector<bool> filled(texts.size(), false);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& item = data[i];
    const std::size_t slot = item.contains("index") ? item["index"].get<std::size_t>() : i;
    if (slot >= texts.size() || filled[slot]) throw Error(ErrorKind::kHttpError, "bad embedding index");
    out[slot] = item.at("embedding").get<std::vector<double>>();
    filled[slot] = true;
  }
  return out;
}

}  // namespace

EmbeddingStore fetch_embeddings(std::span<const EmbeddingInput> inputs, const EmbeddingClientConfig& cfg,
                                const std::optional<std::string>& instruction) {
  EmbeddingStore store(0, cfg.model, instruction);
  if (inputs.empty()) return store;
  const HttpTarget target = parse_url(cfg.endpoint);
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  const std::size_t num_batches = (inputs.size() + batch - 1) / batch;

  std::vector<std::vector<double>> vectors(inputs.size());
  parallel_for(num_batches, cfg.parallelism, [&](std::size_t b) {
    const std::size_t begin = b * batch;
    const std::size_t end = std::min(inputs.size(), begin + batch);
    std::vector<std::string> texts;
    for (std::size_t i = begin; i < end; ++i) texts.push_back(embedding_text(inputs[i], instruction));
    auto got = request_batch(target, cfg, texts);
    for (std::size_t i = begin; i < end; ++i) vectors[i] = std::move(got[i - begin]);
  });

  const std::size_t dim = vectors.front().size();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (vectors[i].size() != dim) {
      throw Error(ErrorKind::kDimensionMismatch, "endpoint returned vectors of lengths " + std::to_string(dim) +
                                                     " and " + std::to_string(vectors[i].size()));
    }
    store.add(inputs[i].id, std::move(vectors[i]));
  }
  return store;
}

std::string EmbeddingCache::key(const std::string& model, const std::optional<std::string>& instruction,
                                const std::string& text) {
  const std::string instruction_hash = instruction ? sha256_hex(*instruction) : std::string("-");
  return sha256_hex(model + '\x1f' + instruction_hash + '\x1f' + sha256_hex(text));
}

EmbeddingCache EmbeddingCache::load(const std::filesystem::path& path) {
  return EmbeddingCache(load_embeddings(path));
}

void EmbeddingCache::save(const std::filesystem::path& path) const { save_embeddings(store_, path); }

const std::vector<double>* EmbeddingCache::find(const std::string& key) const {
  const auto it = store_.vectors().find(key);
  return it == store_.vectors().end() ? nullptr : &it->second;
}

EmbeddingStore fetch_embeddings_cached(std::span<const EmbeddingInput> inputs, const EmbeddingClientConfig& cfg,
                                       const std::optional<std::string>& instruction, EmbeddingCache& cache) {
  if (cache.model() != cfg.model) {
    throw Error(ErrorKind::kConfig, "cache holds model " + cache.model() + ", requested " + cfg.model);
  }
  std::vector<std::string> keys;
  std::vector<EmbeddingInput> missing;
  for (const auto& in : inputs) {
    // The key covers the instruction as rendered for this input's domain.
    keys.push_back(EmbeddingCache::key(cfg.model, instruction, embedding_text(in, instruction)));
    if (!cache.find(keys.back())) missing.push_back(in);
  }
  if (!missing.empty()) {
    const EmbeddingStore fetched = fetch_embeddings(missing, cfg, instruction);
    for (const auto& in : missing) {
      cache.put(EmbeddingCache::key(cfg.model, instruction, embedding_text(in, instruction)), fetched.at(in.id));
    }
  }
  EmbeddingStore store(0, cfg.model, instruction);
  for (std::size_t i = 0; i < inputs.size(); ++i) store.add(inputs[i].id, *cache.find(keys[i]));
  return store;
}

}  // namespace termret
