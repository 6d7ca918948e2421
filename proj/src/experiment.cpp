#include "termret/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <set>
#include <unordered_map>

#include "termret/error.hpp"
#include "termret/treebank.hpp"
#include "termret/util.hpp"

namespace termret {

using ordered_json = nlohmann::ordered_json;
using nlohmann::json;

namespace {

std::string bool_text(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::kConfig, key + ": expected a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error(ErrorKind::kConfig, key + ": expected a number, got '" + v + "'");
  }
  return out;
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (auto s : seeds) out += (out.empty() ? "" : ",") + std::to_string(s);
  return out;
}

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d%02d%02dT%02d%02d%02dZ-%03lld", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<long long>(ms));
  return buf;
}

std::filesystem::path fresh_run_dir(const std::filesystem::path& output) {
  const std::string base = "run-" + utc_stamp();
  std::filesystem::path dir = output / base;
  for (int i = 2; std::filesystem::exists(dir); ++i) dir = output / (base + "-" + std::to_string(i));
  std::filesystem::create_directories(dir);
  return dir;
}

ordered_json interval_json(const Interval& i) { return ordered_json{{"lo", i.lo}, {"hi", i.hi}}; }

ordered_json prf_json(const Prf& m) {
  return ordered_json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

ordered_json run_json(const RunOutcome& run) {
  ordered_json j;
  j["seed"] = run.seed ? ordered_json(*run.seed) : ordered_json(nullptr);
  j["metrics"] = prf_json(run.metrics);
  j["counts"] = {{"tp", run.totals.tp}, {"fp", run.totals.fp}, {"fn", run.totals.fn}};
  j["ci"] = {{"level", run.ci.level},
             {"resamples", run.ci.resamples},
             {"seed", run.ci.seed},
             {"precision", interval_json(run.ci.precision)},
             {"recall", interval_json(run.ci.recall)},
             {"f1", interval_json(run.ci.f1)}};
  ordered_json per_query = ordered_json::array();
  for (const auto& e : run.tor.per_query) per_query.push_back({{"query_id", e.query_id}, {"tor", e.tor}});
  j["tor"] = {{"mean", run.tor.mean_tor},
              {"n_included", run.tor.n_included()},
              {"n_skipped", run.tor.skipped.size()},
              {"skipped", run.tor.skipped},
              {"per_query", per_query}};
  j["correlation"] = {{"method", "spearman"},
                      {"unit", "per-query (TOR_i, F1_i)"},
                      {"value", run.correlation ? ordered_json(*run.correlation) : ordered_json(nullptr)},
                      {"n", run.correlation_points},
                      {"note", run.correlation_note}};
  j["llm_failures"] = run.llm_failures;
  j["empty_outputs"] = run.empty_outputs;
  std::unordered_map<std::string, double> tor_by_id;
  for (const auto& e : run.tor.per_query) tor_by_id[e.query_id] = e.tor;
  ordered_json sentences = ordered_json::array();
  for (const auto& s : run.sentences) {
    ordered_json row = {{"query_id", s.query_id},
                        {"predicted", s.predicted},
                        {"gold", s.gold},
                        {"tp", s.counts.tp},
                        {"fp", s.counts.fp},
                        {"fn", s.counts.fn},
                        {"f1", prf(s.counts).f1}};
    const auto it = tor_by_id.find(s.query_id);
    row["tor"] = it == tor_by_id.end() ? ordered_json(nullptr) : ordered_json(it->second);
    row["llm_failed"] = s.llm_failed;
    sentences.push_back(std::move(row));
  }
  j["sentences"] = std::move(sentences);
  return j;
}

std::string read_if_exists(const std::filesystem::path& p) {
  return std::filesystem::exists(p) ? read_file(p) : std::string();
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

const std::vector<ConfigKey>& ExperimentConfig::keys() {
  static const std::vector<ConfigKey> kKeys = {
      {"demo_corpus", "", "demonstration corpus (JSON lines)"},
      {"query_corpus", "", "query corpus (JSON lines)"},
      {"demo_treebank", "", "trees for the demonstration corpus (<id>\\t<tree>)"},
      {"query_treebank", "", "trees for the query corpus"},
      {"method", "fastkassim", "fastkassim | cassim | bm25 | bge_style_embedding | random"},
      {"k", "10", "demonstrations per prompt"},
      {"seeds", "1,2,3,4", "comma-separated seeds for the random method"},
      {"kernel_lambda", "0.4", "tree kernel decay in (0, 1]"},
      {"kernel_mode", "label", "tree kernel node match: label | production"},
      {"kernel_normalize", "true", "normalize kernel scores to [0, 1]"},
      {"bm25_k1", "1.5", "BM25 k1"},
      {"bm25_b", "0.75", "BM25 b"},
      {"bm25_dedupe", "true", "count each distinct query term once"},
      {"strip_functional", "false", "strip functional suffixes from tree labels"},
      {"drop_punctuation", "false", "drop punctuation preterminals from trees"},
      {"demo_embeddings", "", "precomputed demonstration embeddings file"},
      {"query_embeddings", "", "precomputed query embeddings file"},
      {"embedding_endpoint", "", "embedding service base URL (e.g. http://host:port/v1)"},
      {"embedding_model", "", "embedding model name"},
      {"embedding_instruction", "none", "query instruction: none | default | <file>"},
      {"embedding_cache", "", "content-addressed embedding cache file"},
      {"template", "", "instruction template file (default: built-in)"},
      {"demo_order", "asc", "demonstration order: asc (most similar last) | desc | given"},
      {"llm_endpoint", "", "chat completions base URL (e.g. http://host:port/v1)"},
      {"llm_model", "", "model name sent to the endpoint"},
      {"llm_temperature", "0", "sampling temperature (0 = greedy)"},
      {"llm_allow_sampling", "false", "permit a non-zero temperature"},
      {"llm_max_tokens", "256", "maximum output tokens"},
      {"llm_timeout_ms", "120000", "per-request timeout in milliseconds"},
      {"llm_max_retries", "3", "retries on 429/5xx"},
      {"llm_backoff_ms", "500", "initial retry backoff in milliseconds"},
      {"llm_parallelism", "4", "concurrent model requests"},
      {"resamples", "10000", "bootstrap resamples"},
      {"ci_level", "0.95", "confidence level"},
      {"bootstrap_seed", "0", "bootstrap seed"},
      {"parallelism", "1", "worker threads for retrieval and bootstrap"},
      {"output", "runs", "directory that receives run-<timestamp>/"},
  };
  return kKeys;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string value(trim(raw));
  if (key == "demo_corpus") demo_corpus = value;
  else if (key == "query_corpus") query_corpus = value;
  else if (key == "demo_treebank") demo_treebank = value;
  else if (key == "query_treebank") query_treebank = value;
  else if (key == "method") method = parse_method(value);
  else if (key == "k") k = parse_number<std::size_t>(key, value);
  else if (key == "seeds") {
    seeds.clear();
    for (auto piece : split(value, ',')) {
      if (!trim(piece).empty()) seeds.push_back(parse_number<std::uint64_t>(key, std::string(trim(piece))));
    }
  } else if (key == "kernel_lambda") kernel.decay_lambda = parse_number<double>(key, value);
  else if (key == "kernel_mode") {
    if (value == "label") kernel.match_mode = MatchMode::kLabel;
    else if (value == "production") kernel.match_mode = MatchMode::kProduction;
    else throw Error(ErrorKind::kConfig, "kernel_mode must be label or production");
  } else if (key == "kernel_normalize") kernel.normalize = parse_bool(key, value);
  else if (key == "bm25_k1") bm25.k1 = parse_number<double>(key, value);
  else if (key == "bm25_b") bm25.b = parse_number<double>(key, value);
  else if (key == "bm25_dedupe") bm25.dedupe_query_terms = parse_bool(key, value);
  else if (key == "strip_functional") tree_options.strip_functional = parse_bool(key, value);
  else if (key == "drop_punctuation") tree_options.drop_punctuation = parse_bool(key, value);
  else if (key == "demo_embeddings") demo_embeddings = value;
  else if (key == "query_embeddings") query_embeddings = value;
  else if (key == "embedding_endpoint") embedding_endpoint = value;
  else if (key == "embedding_model") embedding_model = value;
  else if (key == "embedding_instruction") embedding_instruction = value.empty() ? "none" : value;
  else if (key == "embedding_cache") embedding_cache = value;
  else if (key == "template") template_path = value;
  else if (key == "demo_order") demo_order = parse_demo_order(value);
  else if (key == "llm_endpoint") model.endpoint = value;
  else if (key == "llm_model") model.model_name = value;
  else if (key == "llm_temperature") model.temperature = parse_number<double>(key, value);
  else if (key == "llm_allow_sampling") model.allow_sampling = parse_bool(key, value);
  else if (key == "llm_max_tokens") model.max_output_tokens = parse_number<int>(key, value);
  else if (key == "llm_timeout_ms") model.request_timeout = std::chrono::milliseconds(parse_number<long>(key, value));
  else if (key == "llm_max_retries") model.retry.max_retries = parse_number<int>(key, value);
  else if (key == "llm_backoff_ms") model.retry.base_delay = std::chrono::milliseconds(parse_number<long>(key, value));
  else if (key == "llm_parallelism") model.parallelism = parse_number<std::size_t>(key, value);
  else if (key == "resamples") resamples = parse_number<std::size_t>(key, value);
  else if (key == "ci_level") ci_level = parse_number<double>(key, value);
  else if (key == "bootstrap_seed") bootstrap_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "parallelism") parallelism = parse_number<std::size_t>(key, value);
  else if (key == "output") output = value;
  else throw Error(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

std::string ExperimentConfig::get(const std::string& key) const {
  if (key == "demo_corpus") return demo_corpus.string();
  if (key == "query_corpus") return query_corpus.string();
  if (key == "demo_treebank") return demo_treebank.string();
  if (key == "query_treebank") return query_treebank.string();
  if (key == "method") return std::string(to_string(method));
  if (key == "k") return std::to_string(k);
  if (key == "seeds") return join_seeds(seeds);
  if (key == "kernel_lambda") return format_real(kernel.decay_lambda);
  if (key == "kernel_mode") return kernel.match_mode == MatchMode::kLabel ? "label" : "production";
  if (key == "kernel_normalize") return bool_text(kernel.normalize);
  if (key == "bm25_k1") return format_real(bm25.k1);
  if (key == "bm25_b") return format_real(bm25.b);
  if (key == "bm25_dedupe") return bool_text(bm25.dedupe_query_terms);
  if (key == "strip_functional") return bool_text(tree_options.strip_functional);
  if (key == "drop_punctuation") return bool_text(tree_options.drop_punctuation);
  if (key == "demo_embeddings") return demo_embeddings.string();
  if (key == "query_embeddings") return query_embeddings.string();
  if (key == "embedding_endpoint") return embedding_endpoint;
  if (key == "embedding_model") return embedding_model;
  if (key == "embedding_instruction") return embedding_instruction;
  if (key == "embedding_cache") return embedding_cache.string();
  if (key == "template") return template_path.string();
  if (key == "demo_order") return std::string(to_string(demo_order));
  if (key == "llm_endpoint") return model.endpoint;
  if (key == "llm_model") return model.model_name;
  if (key == "llm_temperature") return format_real(model.temperature);
  if (key == "llm_allow_sampling") return bool_text(model.allow_sampling);
  if (key == "llm_max_tokens") return std::to_string(model.max_output_tokens);
  if (key == "llm_timeout_ms") return std::to_string(model.request_timeout.count());
  if (key == "llm_max_retries") return std::to_string(model.retry.max_retries);
  if (key == "llm_backoff_ms") return std::to_string(model.retry.base_delay.count());
  if (key == "llm_parallelism") return std::to_string(model.parallelism);
  if (key == "resamples") return std::to_string(resamples);
  if (key == "ci_level") return format_real(ci_level);
  if (key == "bootstrap_seed") return std::to_string(bootstrap_seed);
  if (key == "parallelism") return std::to_string(parallelism);
  if (key == "output") return output.string();
  throw Error(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

std::string ExperimentConfig::dump() const {
  std::vector<std::string> names;
  for (const auto& k : keys()) names.push_back(k.name);
  std::sort(names.begin(), names.end());
  std::string out;
  for (const auto& n : names) out += n + " = " + get(n) + "\n";
  return out;
}

void ExperimentConfig::validate() const {
  if (demo_corpus.empty()) throw Error(ErrorKind::kConfig, "demo_corpus is not set");
  if (query_corpus.empty()) throw Error(ErrorKind::kConfig, "query_corpus is not set");
  if (k < 1) throw Error(ErrorKind::kConfig, "k must be at least 1");
  kernel.validate();
  if (!(bm25.k1 >= 0.0) || !(bm25.b >= 0.0 && bm25.b <= 1.0)) {
    throw Error(ErrorKind::kConfig, "bm25 requires k1 >= 0 and b in [0, 1]");
  }
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw Error(ErrorKind::kConfig, "ci_level must be in (0, 1)");
  if (resamples < 1) throw Error(ErrorKind::kConfig, "resamples must be at least 1");
  switch (method) {
    case RetrievalMethod::kFastKassim:
    case RetrievalMethod::kCassim:
      if (demo_treebank.empty() || query_treebank.empty()) {
        throw Error(ErrorKind::kConfig, "syntactic retrieval needs demo_treebank and query_treebank");
      }
      break;
    case RetrievalMethod::kEmbedding: {
      const bool files = !demo_embeddings.empty() && !query_embeddings.empty();
      const bool service = !embedding_endpoint.empty() && !embedding_model.empty();
      if (!files && !service) {
        throw Error(ErrorKind::kConfig,
                    "embedding retrieval needs demo_embeddings/query_embeddings or embedding_endpoint/embedding_model");
      }
      break;
    }
    case RetrievalMethod::kRandom:
      if (seeds.empty()) throw Error(ErrorKind::kConfig, "random retrieval needs at least one seed");
      break;
    case RetrievalMethod::kBm25:
      break;
  }
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::kConfig, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    out[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
  }
  return out;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::map<std::string, std::string>& overrides) {
  ExperimentConfig cfg;
  if (file) {
    std::string text;
    try {
      text = read_file(*file);
    } catch (const Error& e) {
      throw Error(ErrorKind::kConfig, e.what());
    }
    for (const auto& [k, v] : parse_config_text(text)) cfg.set(k, v);
  }
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

// ---------------------------------------------------------------------------
// Evaluation and reports

RunOutcome evaluate_run(std::span<const RetrievalResult> retrieval, std::span<const ResponseRecord> responses,
                        std::span<const SentenceRecord> demos, std::span<const SentenceRecord> queries,
                        const EvalSettings& settings, std::optional<std::uint64_t> seed) {
  std::unordered_map<std::string_view, const SentenceRecord*> query_by_id;
  for (const auto& q : queries) query_by_id.emplace(q.id, &q);
  std::unordered_map<std::string_view, const ResponseRecord*> response_by_id;
  for (const auto& r : responses) response_by_id[r.query_id] = &r;

  RunOutcome run;
  run.seed = seed;
  std::vector<MatchCounts> counts;
  for (const auto& result : retrieval) {
    const auto qit = query_by_id.find(result.query_id);
    if (qit == query_by_id.end()) {
      throw Error(ErrorKind::kMissingResource, "no query record for '" + result.query_id + "'");
    }
    SentenceOutcome s;
    s.query_id = result.query_id;
    s.gold = qit->second->terms;
    const auto rit = response_by_id.find(result.query_id);
    if (rit == response_by_id.end() || !rit->second->ok()) {
      s.llm_failed = true;
      ++run.llm_failures;
    } else {
      ParsedResponse parsed = parse_response(rit->second->raw);
      s.predicted = std::move(parsed.terms);
      s.empty_output = parsed.empty_output;
      if (s.empty_output) ++run.empty_outputs;
    }
    s.counts = match_counts(s.predicted, s.gold);
    run.totals += s.counts;
    counts.push_back(s.counts);
    run.sentences.push_back(std::move(s));
  }
  if (counts.empty()) throw Error(ErrorKind::kEmptyCorpus, "no queries to evaluate");
  run.metrics = micro_prf(counts);
  run.ci = bootstrap_ci(counts, settings.resamples, settings.ci_level, settings.bootstrap_seed, settings.parallelism);
  run.tor = term_overlap_ratio(retrieval, demos, queries);

  std::unordered_map<std::string_view, double> f1_by_id;
  for (const auto& s : run.sentences) f1_by_id[s.query_id] = prf(s.counts).f1;
  std::vector<double> xs, ys;
  for (const auto& e : run.tor.per_query) {
    xs.push_back(e.tor);
    ys.push_back(f1_by_id.at(e.query_id));
  }
  run.correlation_points = xs.size();
  try {
    run.correlation = spearman(xs, ys);
  } catch (const Error& e) {
    run.correlation_note = e.kind() == ErrorKind::kConstantSeries ? "undefined: constant series"
                                                                   : "undefined: fewer than two queries";
  }
  return run;
}

Prf ExperimentReport::mean_metrics() const {
  Prf m;
  if (runs.empty()) return m;
  for (const auto& r : runs) {
    m.precision += r.metrics.precision;
    m.recall += r.metrics.recall;
    m.f1 += r.metrics.f1;
  }
  const double n = static_cast<double>(runs.size());
  return {m.precision / n, m.recall / n, m.f1 / n};
}

double ExperimentReport::mean_tor() const {
  if (runs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : runs) s += r.tor.mean_tor;
  return s / static_cast<double>(runs.size());
}

std::string ExperimentReport::to_json() const {
  ordered_json j;
  j["method"] = std::string(to_string(method));
  j["k"] = k;
  j["demo_order"] = std::string(to_string(demo_order));
  j["bootstrap"] = {{"resamples", settings.resamples}, {"level", settings.ci_level}, {"seed", settings.bootstrap_seed}};
  ordered_json seeds = ordered_json::array();
  for (const auto& r : runs) {
    if (r.seed) seeds.push_back(*r.seed);
  }
  j["seeds"] = seeds;
  j["random_generator"] = method == RetrievalMethod::kRandom ? ordered_json(std::string(kRandomGenerator)) : ordered_json(nullptr);
  const Prf mean = mean_metrics();
  j["mean"] = {{"precision", mean.precision}, {"recall", mean.recall}, {"f1", mean.f1}, {"tor", mean_tor()},
               {"runs", runs.size()}};
  ordered_json rs = ordered_json::array();
  for (const auto& r : runs) rs.push_back(run_json(r));
  j["runs"] = std::move(rs);
  return j.dump(2) + "\n";
}

std::string ExperimentReport::to_table() const {
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-12s %4s %6s %7s %7s %7s  %-17s %7s %7s %9s %9s\n", "Method", "K", "Seed", "P", "R",
                "F1", "F1 CI", "TOR", "TOR raw", "Corr", "Corr raw");
  out += buf;
  auto row = [&](const std::string& seed, const Prf& m, const std::string& ci, double tor, const std::string& corr,
                 const std::string& corr_raw) {
    std::snprintf(buf, sizeof buf, "%-12s %4zu %6s %7.2f %7.2f %7.2f  %-17s %7.2f %7.4f %9s %9s\n",
                  std::string(to_string(method)).c_str(), k, seed.c_str(), 100.0 * m.precision, 100.0 * m.recall,
                  100.0 * m.f1, ci.c_str(), 100.0 * tor, tor, corr.c_str(), corr_raw.c_str());
    out += buf;
  };
  for (const auto& r : runs) {
    char ci[64];
    std::snprintf(ci, sizeof ci, "[%.2f, %.2f]", 100.0 * r.ci.f1.lo, 100.0 * r.ci.f1.hi);
    char corr[32] = "n/a", corr_raw[32] = "n/a";
    if (r.correlation) {
      std::snprintf(corr, sizeof corr, "%.2f", 100.0 * *r.correlation);
      std::snprintf(corr_raw, sizeof corr_raw, "%.4f", *r.correlation);
    }
    row(r.seed ? std::to_string(*r.seed) : "-", r.metrics, ci, r.tor.mean_tor, corr, corr_raw);
  }
  if (runs.size() > 1) row("mean", mean_metrics(), "", mean_tor(), "", "");
  std::snprintf(buf, sizeof buf, "(percentages x100; %.0f%% percentile bootstrap CI over %zu resamples)\n",
                100.0 * settings.ci_level, settings.resamples);
  out += buf;
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData data;
  Corpus demos = load_corpus(config.demo_corpus);
  Corpus queries = load_corpus(config.query_corpus);
  auto note = [&](std::size_t n, const std::string& what) {
    if (n) data.warnings.push_back(std::to_string(n) + " " + what);
  };
  note(demos.duplicate_terms_removed + queries.duplicate_terms_removed, "duplicate gold terms removed");
  note(demos.empty_terms_removed + queries.empty_terms_removed, "empty gold terms removed");
  note(demos.comma_terms, "demonstration terms contain commas and are left out of prompts");
  std::size_t containment = 0;
  for (const auto& r : demos.records) containment += check_term_containment(r).size();
  for (const auto& r : queries.records) containment += check_term_containment(r).size();
  note(containment, "gold terms not found verbatim in their sentence");
  data.demos = std::move(demos.records);
  data.queries = std::move(queries.records);

  if (config.method == RetrievalMethod::kFastKassim || config.method == RetrievalMethod::kCassim) {
    attach_trees(data.demos, load_treebank(config.demo_treebank, config.tree_options));
    const auto missing = attach_trees(data.queries, load_treebank(config.query_treebank, config.tree_options));
    if (!missing.empty()) {
      std::string list;
      for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
      throw Error(ErrorKind::kMissingResource, std::to_string(missing.size()) + " queries lack parse trees: " + list);
    }
  }

  if (config.method == RetrievalMethod::kEmbedding) {
    if (!config.demo_embeddings.empty() && !config.query_embeddings.empty()) {
      data.demo_vectors = load_embeddings(config.demo_embeddings);
      data.query_vectors = load_embeddings(config.query_embeddings);
    } else {
      EmbeddingClientConfig client;
      client.endpoint = config.embedding_endpoint;
      client.model = config.embedding_model;
      client.parallelism = std::max<std::size_t>(1, config.model.parallelism);
      std::optional<std::string> instruction;
      if (config.embedding_instruction == "default") {
        instruction = std::string(embedding_instruction_template());
      } else if (config.embedding_instruction != "none") {
        std::string text = read_file(config.embedding_instruction);
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
        instruction = text;
      }
      EmbeddingCache cache = !config.embedding_cache.empty() && std::filesystem::exists(config.embedding_cache)
                                 ? EmbeddingCache::load(config.embedding_cache)
                                 : EmbeddingCache(config.embedding_model);
      auto inputs = [](const std::vector<SentenceRecord>& records) {
        std::vector<EmbeddingInput> in;
        for (const auto& r : records) in.push_back({r.id, r.text, r.domain});
        return in;
      };
      data.demo_vectors = fetch_embeddings_cached(inputs(data.demos), client, std::nullopt, cache);
      data.query_vectors = fetch_embeddings_cached(inputs(data.queries), client, instruction, cache);
      if (!config.embedding_cache.empty()) cache.save(config.embedding_cache);
    }
  }
  return data;
}

std::vector<PromptBundle> build_prompts(std::span<const RetrievalResult> retrieval,
                                        std::span<const SentenceRecord> demos,
                                        std::span<const SentenceRecord> queries, std::string_view instruction_template,
                                        DemoOrder order) {
  std::unordered_map<std::string_view, const SentenceRecord*> demo_by_id, query_by_id;
  for (const auto& d : demos) demo_by_id.emplace(d.id, &d);
  for (const auto& q : queries) query_by_id.emplace(q.id, &q);
  std::vector<PromptBundle> out;
  out.reserve(retrieval.size());
  for (const auto& result : retrieval) {
    const auto qit = query_by_id.find(result.query_id);
    if (qit == query_by_id.end()) {
      throw Error(ErrorKind::kMissingResource, "no query record for '" + result.query_id + "'");
    }
    std::vector<const SentenceRecord*> picked;
    for (const auto& s : order_demonstrations(result.selected, order)) {
      const auto dit = demo_by_id.find(s.demo_id);
      if (dit == demo_by_id.end()) throw Error(ErrorKind::kUnknownDemoId, "unknown demo '" + s.demo_id + "'");
      picked.push_back(dit->second);
    }
    out.push_back(build_prompt(render_instruction(instruction_template, qit->second->domain), picked, *qit->second));
  }
  return out;
}

std::string serialize_prompts(std::span<const PromptBundle> prompts) {
  std::string out;
  for (const auto& p : prompts) {
    ordered_json j = {{"query_id", p.query_id},
                      {"domain", p.domain},
                      {"demo_ids", p.demo_ids},
                      {"prompt_hash", prompt_hash(p)},
                      {"text", p.text}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<PromptBundle> parse_prompts(std::string_view contents) {
  std::vector<PromptBundle> out;
  std::size_t line_no = 0;
  for (auto line : split(contents, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("query_id").get<std::string>(), j.at("text").get<std::string>(),
                     j.at("demo_ids").get<std::vector<std::string>>(), j.at("domain").get<std::string>()});
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kMalformedLine, "prompt log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string run_tag(RetrievalMethod method, std::optional<std::uint64_t> seed) {
  std::string tag(to_string(method));
  if (seed) tag += "-seed" + std::to_string(*seed);
  return tag;
}

namespace {

std::vector<std::optional<std::uint64_t>> run_seeds(const ExperimentConfig& config) {
  std::vector<std::optional<std::uint64_t>> seeds;
  if (config.method == RetrievalMethod::kRandom) {
    for (auto s : config.seeds) seeds.emplace_back(s);
  } else {
    seeds.emplace_back(std::nullopt);
  }
  return seeds;
}

EvalSettings eval_settings(const ExperimentConfig& config) {
  return {config.resamples, config.ci_level, config.bootstrap_seed, config.parallelism};
}

ExperimentReport empty_report(const ExperimentConfig& config) {
  ExperimentReport report;
  report.method = config.method;
  report.k = config.k;
  report.demo_order = config.demo_order;
  report.settings = eval_settings(config);
  return report;
}

std::string manifest_json(const ExperimentConfig& config, const std::filesystem::path& dir) {
  ordered_json j;
  j["created"] = utc_stamp();
  j["run_dir"] = dir.string();
  j["config_hash"] = sha256_hex(config.dump());
  ordered_json cfg = ordered_json::object();
  for (const auto& k : ExperimentConfig::keys()) cfg[k.name] = config.get(k.name);
  j["config"] = cfg;
  ordered_json seeds = ordered_json::array();
  if (config.method == RetrievalMethod::kRandom) {
    for (auto s : config.seeds) seeds.push_back(s);
  }
  j["seeds"] = seeds;
  j["random_generator"] = std::string(kRandomGenerator);
  ordered_json inputs = ordered_json::array();
  for (const auto& p : {config.demo_corpus, config.query_corpus, config.demo_treebank, config.query_treebank,
                        config.demo_embeddings, config.query_embeddings, config.template_path}) {
    if (p.empty() || !std::filesystem::exists(p)) continue;
    inputs.push_back({{"path", p.string()}, {"sha256", sha256_hex(read_file(p))}});
  }
  j["inputs"] = inputs;
  return j.dump(2) + "\n";
}

void write_report(const ExperimentReport& report, const ExperimentConfig& config, const std::filesystem::path& dir,
                  RunPaths* paths) {
  RunPaths p{dir, dir / "report.json", dir / "report.txt", dir / "manifest.json"};
  write_file(p.report_json, report.to_json());
  write_file(p.report_text, report.to_table());
  write_file(p.manifest, manifest_json(config, dir));
  if (paths) *paths = p;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options, RunPaths* paths) {
  config.validate();
  if (!options.skip_llm) config.model.validate();
  PreparedData data = prepare_data(config);
  const std::string tmpl = config.template_path.empty() ? std::string(default_instruction_template())
                                                        : load_template(config.template_path);
  RetrievalOptions ropts;
  ropts.kernel = config.kernel;
  ropts.bm25 = config.bm25;
  ropts.parallelism = config.parallelism;
  if (data.demo_vectors) ropts.demo_embeddings = &*data.demo_vectors;
  if (data.query_vectors) ropts.query_embeddings = &*data.query_vectors;
  const Retriever retriever(data.demos, config.method, ropts);

  const std::filesystem::path dir = options.resume_dir ? *options.resume_dir : fresh_run_dir(config.output);
  std::filesystem::create_directories(dir);

  ExperimentReport report = empty_report(config);
  std::size_t sent = 0, failed = 0;
  for (const auto& seed : run_seeds(config)) {
    const std::string tag = run_tag(config.method, seed);
    const auto retrieval = retrieve_all(data.queries, retriever, config.k, seed, config.parallelism);
    write_file(dir / ("retrieval-" + tag + ".jsonl"), serialize_retrieval(retrieval));
    const auto prompts = build_prompts(retrieval, data.demos, data.queries, tmpl, config.demo_order);
    write_file(dir / ("prompts-" + tag + ".jsonl"), serialize_prompts(prompts));

    const auto log_path = dir / ("responses-" + tag + ".jsonl");
    std::vector<ResponseRecord> previous;
    if (options.resume_dir) previous = parse_responses(read_if_exists(log_path));

    std::vector<ResponseRecord> responses;
    if (options.skip_llm) {
      std::map<std::pair<std::string, std::string>, const ResponseRecord*> logged;
      for (const auto& r : previous) logged[{r.query_id, r.prompt_hash}] = &r;
      for (const auto& p : prompts) {
        const auto it = logged.find({p.query_id, prompt_hash(p)});
        if (it != logged.end()) {
          responses.push_back(*it->second);
        } else {
          ResponseRecord missing{p.query_id, prompt_hash(p), "", 0.0, 0, {}, std::string("not in response log")};
          responses.push_back(std::move(missing));
        }
      }
    } else {
      BatchStats stats;
      responses = run_batch(prompts, config.model, previous, &stats);
      sent += stats.requests_issued;
      for (const auto& r : responses) failed += r.ok() ? 0 : 1;
      // Raw responses are persisted before anything is parsed.
      write_file(log_path, serialize_responses(responses));
    }
    report.runs.push_back(
        evaluate_run(retrieval, responses, data.demos, data.queries, eval_settings(config), seed));
  }
  write_report(report, config, dir, paths);
  if (sent > 0 && failed == sent) {
    throw Error(ErrorKind::kRetriesExhausted, "every model request failed; see the response log in " + dir.string());
  }
  return report;
}

ExperimentReport evaluate_run_dir(const ExperimentConfig& config, const std::filesystem::path& run_dir) {
  const Corpus demos = load_corpus(config.demo_corpus);
  const Corpus queries = load_corpus(config.query_corpus);
  ExperimentReport report = empty_report(config);
  for (const auto& seed : run_seeds(config)) {
    const std::string tag = run_tag(config.method, seed);
    const auto retrieval_path = run_dir / ("retrieval-" + tag + ".jsonl");
    if (!std::filesystem::exists(retrieval_path)) {
      throw Error(ErrorKind::kMissingResource, "missing " + retrieval_path.string());
    }
    const auto retrieval = parse_retrieval(read_file(retrieval_path));
    const auto responses = parse_responses(read_if_exists(run_dir / ("responses-" + tag + ".jsonl")));
    report.runs.push_back(
        evaluate_run(retrieval, responses, demos.records, queries.records, eval_settings(config), seed));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Comparison

namespace {

std::vector<std::pair<std::string, MatchCounts>> report_counts(std::string_view text, std::size_t run_index) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kMalformedLine, std::string("report is not JSON: ") + e.what());
  }
  const auto& runs = j.at("runs");
  if (run_index >= runs.size()) {
    throw Error(ErrorKind::kInvalidArgument, "report has " + std::to_string(runs.size()) + " runs");
  }
  std::vector<std::pair<std::string, MatchCounts>> out;
  for (const auto& s : runs[run_index].at("sentences")) {
    out.emplace_back(s.at("query_id").get<std::string>(),
                     MatchCounts{s.at("tp").get<std::size_t>(), s.at("fp").get<std::size_t>(),
                                 s.at("fn").get<std::size_t>()});
  }
  return out;
}

}  // namespace

Comparison compare_reports(std::string_view report_a_json, std::string_view report_b_json, std::size_t resamples,
                           std::uint64_t seed, std::size_t run_a, std::size_t run_b) {
  const auto a = report_counts(report_a_json, run_a);
  const auto b = report_counts(report_b_json, run_b);
  std::map<std::string, MatchCounts> b_by_id(b.begin(), b.end());
  std::set<std::string> a_ids;
  for (const auto& [id, _] : a) a_ids.insert(id);
  std::set<std::string> b_ids;
  for (const auto& [id, _] : b) b_ids.insert(id);
  if (a_ids != b_ids || a.size() != b.size()) {
    throw Error(ErrorKind::kCorpusMismatch, "reports cover different query sets");
  }
  std::vector<MatchCounts> ca, cb;
  for (const auto& [id, c] : a) {
    ca.push_back(c);
    cb.push_back(b_by_id.at(id));
  }
  Comparison out;
  out.sentences = ca.size();
  out.f1_a = micro_prf(ca).f1;
  out.f1_b = micro_prf(cb).f1;
  out.p_value = paired_bootstrap_pvalue(ca, cb, resamples, seed);
  out.significant = out.p_value < 0.05;
  return out;
}

std::string comparison_json(const Comparison& c) {
  ordered_json j = {{"sentences", c.sentences}, {"f1_a", c.f1_a},     {"f1_b", c.f1_b},
                    {"delta_f1", c.f1_a - c.f1_b}, {"p_value", c.p_value}, {"significant", c.significant}};
  return j.dump(2) + "\n";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kMissingPlaceholder:
      return 1;
    case ErrorKind::kHttpError:
    case ErrorKind::kTimeout:
    case ErrorKind::kRetriesExhausted:
    case ErrorKind::kContentFilter:
      return 3;
    default:
      return 2;
  }
}

}  // namespace termret
