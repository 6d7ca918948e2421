// termret: retrieval-augmented term extraction experiments from the shell.
#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "termret/corpus.hpp"
#include "termret/error.hpp"
#include "termret/evaluation.hpp"
#include "termret/experiment.hpp"
#include "termret/mock_llm.hpp"
#include "termret/prompting.hpp"
#include "termret/retrieval.hpp"
#include "termret/semantic_sim.hpp"
#include "termret/treebank.hpp"
#include "termret/util.hpp"

namespace {

using namespace termret;

std::string flag_name(const std::string& key) {
  std::string out = "--" + key;
  for (auto& c : out) {
    if (c == '_') c = '-';
  }
  return out;
}

// Config file plus one --flag per key; flags win over the file.
struct ConfigArgs {
  std::string file;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", file, "experiment config file (key = value lines)");
    for (const auto& key : ExperimentConfig::keys()) {
      auto* opt = app->add_option(flag_name(key.name), values[key.name], key.help + " [" + key.default_value + "]")
                      ->group("Config overrides");
      options.emplace_back(key.name, opt);
    }
  }

  ExperimentConfig load() const {
    std::map<std::string, std::string> overrides;
    for (const auto& [name, opt] : options) {
      if (opt->count() > 0) overrides[name] = values.at(name);
    }
    return load_config(file.empty() ? std::nullopt : std::optional<std::filesystem::path>(file), overrides);
  }
};

void print_warnings(const PreparedData& data) {
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_parse_trees(const std::string& input, const std::string& output, const TreeOptions& opts) {
  const Treebank bank = load_treebank(input, opts);
  if (!output.empty()) write_file(output, serialize_treebank(bank));
  std::cout << bank.size() << " trees ok\n";
  return 0;
}

int cmd_embed(const ExperimentConfig& cfg, const std::string& demo_out, const std::string& query_out) {
  ExperimentConfig c = cfg;
  c.method = RetrievalMethod::kEmbedding;
  c.demo_embeddings.clear();
  c.query_embeddings.clear();
  if (c.embedding_endpoint.empty() || c.embedding_model.empty()) {
    throw Error(ErrorKind::kConfig, "embed needs --embedding-endpoint and --embedding-model");
  }
  const PreparedData data = prepare_data(c);
  print_warnings(data);
  if (!demo_out.empty()) save_embeddings(*data.demo_vectors, demo_out);
  if (!query_out.empty()) save_embeddings(*data.query_vectors, query_out);
  std::cout << data.demo_vectors->size() << " demonstration and " << data.query_vectors->size()
            << " query vectors\n";
  return 0;
}

Retriever make_retriever(const ExperimentConfig& cfg, const PreparedData& data) {
  RetrievalOptions opts;
  opts.kernel = cfg.kernel;
  opts.bm25 = cfg.bm25;
  opts.parallelism = cfg.parallelism;
  if (data.demo_vectors) opts.demo_embeddings = &*data.demo_vectors;
  if (data.query_vectors) opts.query_embeddings = &*data.query_vectors;
  return Retriever(data.demos, cfg.method, opts);
}

int cmd_retrieve(const ExperimentConfig& cfg, const std::string& out, const std::string& score_cache) {
  cfg.validate();
  const PreparedData data = prepare_data(cfg);
  print_warnings(data);
  const Retriever retriever = make_retriever(cfg, data);
  std::vector<std::optional<std::uint64_t>> seeds;
  if (cfg.method == RetrievalMethod::kRandom) {
    for (auto s : cfg.seeds) seeds.emplace_back(s);
  } else {
    seeds.emplace_back(std::nullopt);
  }
  std::vector<RetrievalResult> all;
  std::size_t clamped = 0;
  for (const auto& seed : seeds) {
    std::size_t c = 0;
    auto results = retrieve_all(data.queries, retriever, cfg.k, seed, cfg.parallelism, &c);
    clamped += c;
    all.insert(all.end(), results.begin(), results.end());
  }
  if (clamped) std::cerr << "warning: k clamped to the corpus size for " << clamped << " queries\n";
  const std::string text = serialize_retrieval(all);
  if (out.empty()) std::cout << text;
  else write_file(out, text);

  if (!score_cache.empty()) {
    if (cfg.method == RetrievalMethod::kRandom) throw Error(ErrorKind::kConfig, "random retrieval has no scores");
    std::vector<ScoreRecord> records;
    for (const auto& q : data.queries) {
      const auto scores = retriever.score(q);
      for (std::size_t i = 0; i < scores.size(); ++i) {
        records.push_back({q.id, data.demos[i].id, cfg.method, scores[i]});
      }
    }
    write_file(score_cache, serialize_score_cache(records));
  }
  return 0;
}

int print_report(const ExperimentReport& report, const RunPaths* paths) {
  std::cout << report.to_table();
  if (paths) std::cout << "artifacts: " << paths->dir.string() << "\n";
  return 0;
}

int cmd_run(const ExperimentConfig& cfg, const std::string& resume, bool skip_llm) {
  RunOptions opts;
  if (!resume.empty()) opts.resume_dir = resume;
  opts.skip_llm = skip_llm;
  if (skip_llm && !opts.resume_dir) throw Error(ErrorKind::kConfig, "--skip-llm needs --resume <run dir>");
  RunPaths paths;
  const ExperimentReport report = run_experiment(cfg, opts, &paths);
  return print_report(report, &paths);
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& run_dir, const std::string& out) {
  const ExperimentReport report = evaluate_run_dir(cfg, run_dir);
  if (!out.empty()) {
    write_file(std::filesystem::path(out) / "report.json", report.to_json());
    write_file(std::filesystem::path(out) / "report.txt", report.to_table());
  }
  return print_report(report, nullptr);
}

int cmd_tor(const ExperimentConfig& cfg, const std::string& retrieval_file) {
  const Corpus demos = load_corpus(cfg.demo_corpus);
  const Corpus queries = load_corpus(cfg.query_corpus);
  const auto retrieval = parse_retrieval(read_file(retrieval_file));
  const TorReport tor = term_overlap_ratio(retrieval, demos.records, queries.records);
  char buf[160];
  std::snprintf(buf, sizeof buf, "mean TOR %.4f (%.2f%%) over %zu queries; %zu skipped (empty gold)\n", tor.mean_tor,
                100.0 * tor.mean_tor, tor.n_included(), tor.skipped.size());
  std::cout << buf;
  for (const auto& e : tor.per_query) std::cout << e.query_id << "\t" << format_real(e.tor) << "\n";
  return 0;
}

int cmd_compare(const std::string& a, const std::string& b, std::size_t resamples, std::uint64_t seed,
                std::size_t run_a, std::size_t run_b) {
  const Comparison c = compare_reports(read_file(a), read_file(b), resamples, seed, run_a, run_b);
  std::cout << comparison_json(c);
  return 0;
}

int cmd_stats(const std::vector<std::string>& files, bool as_json) {
  std::vector<std::pair<std::string, CorpusStats>> rows;
  for (const auto& f : files) {
    const Corpus c = load_corpus(f);
    rows.emplace_back(std::filesystem::path(f).stem().string(), corpus_stats(c.records));
  }
  if (as_json) {
    for (const auto& [name, s] : rows) std::cout << name << "\t" << stats_json(s) << "\n";
  } else {
    std::cout << stats_table(rows);
  }
  return 0;
}

MockLlmServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_mock(const std::string& mode, const std::string& fixed, const std::string& queries, int port,
             std::size_t dim) {
  MockLlmOptions opts;
  opts.mode = parse_mock_mode(mode);
  opts.fixed_text = fixed;
  opts.embedding_dim = dim;
  if (!queries.empty()) opts.queries = load_corpus(queries).records;
  MockLlmServer server(opts, port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << server.base_url() << std::endl;
  server.wait();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented in-context term extraction experiments"};
  app.require_subcommand(1);

  auto* parse = app.add_subcommand("parse-trees", "validate (and optionally normalize) a treebank");
  std::string tb_in, tb_out;
  TreeOptions tree_opts;
  parse->add_option("input", tb_in, "treebank file (<id>\\t<bracketed tree> per line)")->required();
  parse->add_option("-o,--output", tb_out, "write the normalized treebank here");
  parse->add_flag("--strip-functional", tree_opts.strip_functional, "strip functional label suffixes");
  parse->add_flag("--drop-punctuation", tree_opts.drop_punctuation, "drop punctuation preterminals");

  auto* embed = app.add_subcommand("embed", "embed both corpora through the embedding endpoint (fills the cache)");
  ConfigArgs embed_cfg;
  embed_cfg.attach(embed);
  std::string demo_out, query_out;
  embed->add_option("--demo-out", demo_out, "write demonstration vectors here");
  embed->add_option("--query-out", query_out, "write query vectors here");

  auto* retrieve = app.add_subcommand("retrieve", "select demonstrations for every query");
  ConfigArgs retrieve_cfg;
  retrieve_cfg.attach(retrieve);
  std::string retrieve_out, score_cache;
  retrieve->add_option("-o,--out", retrieve_out, "retrieval dump (JSON lines); stdout if omitted");
  retrieve->add_option("--score-cache", score_cache, "also write every query/demonstration score here");

  auto* run = app.add_subcommand("run", "retrieval, prompting, model calls and evaluation");
  ConfigArgs run_cfg;
  run_cfg.attach(run);
  std::string resume;
  bool skip_llm = false;
  run->add_option("--resume", resume, "reuse this run directory and its response logs");
  run->add_flag("--skip-llm", skip_llm, "never call the model; score only logged responses");

  auto* eval = app.add_subcommand("eval", "recompute a report from a run directory");
  ConfigArgs eval_cfg;
  eval_cfg.attach(eval);
  std::string run_dir, eval_out;
  eval->add_option("run_dir", run_dir, "run directory")->required();
  eval->add_option("-o,--out", eval_out, "write report.json and report.txt into this directory");

  auto* tor = app.add_subcommand("tor", "term overlap ratio of a retrieval dump");
  ConfigArgs tor_cfg;
  tor_cfg.attach(tor);
  std::string tor_file;
  tor->add_option("retrieval", tor_file, "retrieval dump")->required();

  auto* compare = app.add_subcommand("compare", "paired bootstrap significance between two reports");
  std::string report_a, report_b;
  std::size_t cmp_resamples = 10000, run_a = 0, run_b = 0;
  std::uint64_t cmp_seed = 0;
  compare->add_option("report_a", report_a)->required();
  compare->add_option("report_b", report_b)->required();
  compare->add_option("--resamples", cmp_resamples, "bootstrap resamples");
  compare->add_option("--seed", cmp_seed, "bootstrap seed");
  compare->add_option("--run-a", run_a, "run index within report A");
  compare->add_option("--run-b", run_b, "run index within report B");

  auto* stats = app.add_subcommand("stats", "sentence/word/term statistics of corpora");
  std::vector<std::string> stats_files;
  bool stats_json_out = false;
  stats->add_option("corpus", stats_files, "corpus files")->required();
  stats->add_flag("--json", stats_json_out, "JSON instead of a table");

  auto* mock = app.add_subcommand("mock-llm", "serve a deterministic OpenAI-compatible stub");
  std::string mock_mode = "no-term", mock_fixed, mock_queries;
  int mock_port = 0;
  std::size_t mock_dim = 16;
  mock->add_option("--mode", mock_mode, "gold-echo | no-term | last-demo-echo | first-demo-echo | fixed");
  mock->add_option("--fixed-text", mock_fixed, "reply for --mode fixed");
  mock->add_option("--queries", mock_queries, "query corpus (gold-echo)");
  mock->add_option("--port", mock_port, "port (0 picks a free one)");
  mock->add_option("--dim", mock_dim, "embedding dimension");

  auto* tmpl = app.add_subcommand("template", "print the built-in instruction template");
  bool embedding_tmpl = false;
  tmpl->add_flag("--embedding", embedding_tmpl, "print the embedding query instruction instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*parse) return cmd_parse_trees(tb_in, tb_out, tree_opts);
    if (*embed) return cmd_embed(embed_cfg.load(), demo_out, query_out);
    if (*retrieve) return cmd_retrieve(retrieve_cfg.load(), retrieve_out, score_cache);
    if (*run) return cmd_run(run_cfg.load(), resume, skip_llm);
    if (*eval) return cmd_eval(eval_cfg.load(), run_dir, eval_out);
    if (*tor) return cmd_tor(tor_cfg.load(), tor_file);
    if (*compare) return cmd_compare(report_a, report_b, cmp_resamples, cmp_seed, run_a, run_b);
    if (*stats) return cmd_stats(stats_files, stats_json_out);
    if (*mock) return cmd_mock(mock_mode, mock_fixed, mock_queries, mock_port, mock_dim);
    if (*tmpl) {
      std::cout << (embedding_tmpl ? embedding_instruction_template() : default_instruction_template()) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
