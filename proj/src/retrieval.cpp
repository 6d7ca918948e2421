#include "termret/retrieval.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>

#include "termret/error.hpp"
#include "termret/util.hpp"

namespace termret {

using nlohmann::json;

std::string_view to_string(RetrievalMethod method) {
  switch (method) {
    case RetrievalMethod::kFastKassim: return "fastkassim";
    case RetrievalMethod::kCassim: return "cassim";
    case RetrievalMethod::kBm25: return "bm25";
    case RetrievalMethod::kEmbedding: return "embedding";
    case RetrievalMethod::kRandom: return "random";
  }
  return "fastkassim";
}

RetrievalMethod parse_method(std::string_view name) {
  if (name == "fastkassim") return RetrievalMethod::kFastKassim;
  if (name == "cassim") return RetrievalMethod::kCassim;
  if (name == "bm25") return RetrievalMethod::kBm25;
  if (name == "embedding" || name == "bge_style_embedding") return RetrievalMethod::kEmbedding;
  if (name == "random") return RetrievalMethod::kRandom;
  throw Error(ErrorKind::kConfig, "unknown retrieval method '" + std::string(name) + "'");
}

TopK top_k(std::span<const double> scores, std::size_t k) {
  if (scores.empty()) throw Error(ErrorKind::kEmptyScoreVector, "nothing to rank");
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be at least 1");
  for (double s : scores) {
    if (std::isnan(s)) throw Error(ErrorKind::kInvalidArgument, "score vector contains NaN");
  }
  TopK out;
  out.clamped = k > scores.size();
  const std::size_t take = std::min(k, scores.size());
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), better);
  idx.resize(take);
  out.indices = std::move(idx);
  return out;
}

std::vector<std::size_t> random_select(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) {
    throw Error(ErrorKind::kKExceedsN, "cannot draw " + std::to_string(k) + " of " + std::to_string(n));
  }
  std::mt19937_64 gen(seed);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(gen, n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

Retriever::Retriever(std::span<const SentenceRecord> demos, RetrievalMethod method, RetrievalOptions options)
    : demos_(demos), method_(method), options_(std::move(options)) {
  options_.kernel.validate();
  auto missing_error = [&](const std::string& what, const std::vector<std::string>& ids) {
    std::string list;
    for (std::size_t i = 0; i < ids.size() && i < 20; ++i) list += (i ? ", " : "") + ids[i];
    if (ids.size() > 20) list += ", ...";
    return Error(ErrorKind::kMissingResource, std::to_string(ids.size()) + " demonstrations lack " + what + ": " + list);
  };
  switch (method_) {
    case RetrievalMethod::kFastKassim:
    case RetrievalMethod::kCassim: {
      std::vector<std::string> missing;
      for (const auto& d : demos_) {
        if (!d.tree || d.tree->empty()) missing.push_back(d.id);
        demo_trees_.push_back(d.tree ? &*d.tree : nullptr);
      }
      if (!missing.empty()) throw missing_error("parse trees", missing);
      if (method_ == RetrievalMethod::kFastKassim && options_.kernel.normalize) {
        demo_self_kernels_.resize(demos_.size());
        parallel_for(demos_.size(), options_.parallelism, [&](std::size_t j) {
          demo_self_kernels_[j] = tree_kernel(*demo_trees_[j], *demo_trees_[j], options_.kernel);
        });
      }
      break;
    }
    case RetrievalMethod::kBm25: {
      std::vector<std::vector<std::string>> docs;
      docs.reserve(demos_.size());
      for (const auto& d : demos_) docs.push_back(tokenize(d.text));
      bm25_ = Bm25Index::build(docs, options_.bm25);
      break;
    }
    case RetrievalMethod::kEmbedding: {
      if (!options_.demo_embeddings || !options_.query_embeddings) {
        throw Error(ErrorKind::kMissingResource, "embedding retrieval needs demonstration and query vectors");
      }
      std::vector<std::string> missing;
      for (const auto& d : demos_) {
        if (!options_.demo_embeddings->contains(d.id)) missing.push_back(d.id);
      }
      if (!missing.empty()) throw missing_error("embeddings", missing);
      if (options_.demo_embeddings->dim() != options_.query_embeddings->dim() &&
          !options_.demo_embeddings->empty() && !options_.query_embeddings->empty()) {
        throw Error(ErrorKind::kDimensionMismatch, "query and demonstration embeddings differ in dimension");
      }
      break;
    }
    case RetrievalMethod::kRandom:
      break;
  }
}

std::vector<double> Retriever::score(const SentenceRecord& query) const {
  std::vector<double> out(demos_.size(), 0.0);
  switch (method_) {
    case RetrievalMethod::kFastKassim:
    case RetrievalMethod::kCassim: {
      if (!query.tree || query.tree->empty()) {
        throw Error(ErrorKind::kMissingResource, "query " + query.id + " has no parse tree");
      }
      const ParseTree& q = *query.tree;
      if (method_ == RetrievalMethod::kCassim) {
        for (std::size_t j = 0; j < demos_.size(); ++j) out[j] = normalized_edit_similarity(q, *demo_trees_[j]);
      } else if (!options_.kernel.normalize) {
        for (std::size_t j = 0; j < demos_.size(); ++j) out[j] = tree_kernel(q, *demo_trees_[j], options_.kernel);
      } else {
        const double self = tree_kernel(q, q, options_.kernel);
        if (!(self > 0.0)) throw Error(ErrorKind::kDegenerateTree, "query " + query.id + " has a zero self-kernel");
        for (std::size_t j = 0; j < demos_.size(); ++j) {
          const double k = tree_kernel(q, *demo_trees_[j], options_.kernel);
          out[j] = std::clamp(k / std::sqrt(self * demo_self_kernels_[j]), 0.0, 1.0);
        }
      }
      break;
    }
    case RetrievalMethod::kBm25: {
      out = bm25_->score_all(tokenize(query.text));
      break;
    }
    case RetrievalMethod::kEmbedding: {
      if (!options_.query_embeddings->contains(query.id)) {
        throw Error(ErrorKind::kMissingResource, "query " + query.id + " has no embedding");
      }
      const auto& qv = options_.query_embeddings->at(query.id);
      for (std::size_t j = 0; j < demos_.size(); ++j) {
        out[j] = cosine(qv, options_.demo_embeddings->at(demos_[j].id));
      }
      break;
    }
    case RetrievalMethod::kRandom:
      throw Error(ErrorKind::kInvalidArgument, "random retrieval has no scores");
  }
  return out;
}

RetrievalResult Retriever::retrieve(const SentenceRecord& query, std::size_t k, std::optional<std::uint64_t> seed,
                                    bool* clamped) const {
  if (demos_.empty()) throw Error(ErrorKind::kEmptyScoreVector, "demonstration corpus is empty");
  RetrievalResult result;
  result.query_id = query.id;
  result.method = method_;
  result.k = k;
  if (method_ == RetrievalMethod::kRandom) {
    if (!seed) throw Error(ErrorKind::kConfig, "random retrieval needs a seed");
    if (k == 0) throw Error(ErrorKind::kInvalidArgument, "k must be at least 1");
    const std::size_t take = std::min(k, demos_.size());
    if (clamped) *clamped = k > demos_.size();
    // Each query draws from its own substream of the run seed.
    const std::uint64_t query_seed = substream_seed(*seed, fnv1a64(query.id));
    for (auto idx : random_select(demos_.size(), take, query_seed)) {
      result.selected.push_back({demos_[idx].id, 0.0});
    }
    result.seed = seed;
    return result;
  }
  const auto scores = score(query);
  const TopK top = top_k(scores, k);
  if (clamped) *clamped = top.clamped;
  for (auto idx : top.indices) result.selected.push_back({demos_[idx].id, scores[idx]});
  return result;
}

std::vector<double> score_all(const SentenceRecord& query, std::span<const SentenceRecord> demos,
                              RetrievalMethod method, const RetrievalOptions& options) {
  return Retriever(demos, method, options).score(query);
}

std::vector<RetrievalResult> retrieve_all(std::span<const SentenceRecord> queries, const Retriever& retriever,
                                          std::size_t k, std::optional<std::uint64_t> seed,
                                          std::size_t parallelism, std::size_t* clamped_count) {
  std::vector<RetrievalResult> out(queries.size());
  std::vector<char> clamped(queries.size(), 0);
  parallel_for(queries.size(), parallelism, [&](std::size_t i) {
    bool c = false;
    out[i] = retriever.retrieve(queries[i], k, seed, &c);
    clamped[i] = c;
  });
  if (clamped_count) *clamped_count = static_cast<std::size_t>(std::count(clamped.begin(), clamped.end(), 1));
  return out;
}

std::string serialize_retrieval(std::span<const RetrievalResult> results) {
  std::string out;
  for (const auto& r : results) {
    json selected = json::array();
    for (const auto& s : r.selected) selected.push_back({{"demo_id", s.demo_id}, {"score", s.score}});
    json obj = {{"query_id", r.query_id}, {"method", std::string(to_string(r.method))}, {"k", r.k}};
    obj["seed"] = r.seed ? json(*r.seed) : json(nullptr);
    obj["selected"] = std::move(selected);
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<RetrievalResult> parse_retrieval(std::string_view contents) {
  std::vector<RetrievalResult> out;
  std::size_t line_no = 0;
  for (auto line : split(contents, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json obj = json::parse(line);
      RetrievalResult r;
      r.query_id = obj.at("query_id").get<std::string>();
      r.method = parse_method(obj.at("method").get<std::string>());
      r.k = obj.at("k").get<std::size_t>();
      if (obj.contains("seed") && !obj["seed"].is_null()) r.seed = obj["seed"].get<std::uint64_t>();
      for (const auto& s : obj.at("selected")) {
        r.selected.push_back({s.at("demo_id").get<std::string>(), s.at("score").get<double>()});
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kMalformedLine, "retrieval dump line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string serialize_score_cache(std::span<const ScoreRecord> records) {
  std::string out;
  for (const auto& r : records) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", r.score);
    out += r.query_id + "\t" + r.demo_id + "\t" + std::string(to_string(r.method)) + "\t" + buf + "\n";
  }
  return out;
}

std::vector<ScoreRecord> parse_score_cache(std::string_view contents) {
  std::vector<ScoreRecord> out;
  std::size_t line_no = 0;
  for (auto line : split(contents, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw Error(ErrorKind::kMalformedLine, "score cache line " + std::to_string(line_no) + ": expected 4 fields");
    }
    ScoreRecord r{std::string(fields[0]), std::string(fields[1]), parse_method(fields[2]), 0.0};
    auto [p, ec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), r.score);
    if (ec != std::errc() || p != fields[3].data() + fields[3].size()) {
      throw Error(ErrorKind::kMalformedLine, "score cache line " + std::to_string(line_no) + ": bad score");
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace termret
