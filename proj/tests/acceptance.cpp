// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 100).
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "termret/error.hpp"
#include "termret/experiment.hpp"
#include "termret/lexical_sim.hpp"
#include "termret/mock_llm.hpp"
#include "termret/util.hpp"

namespace {

using namespace termret;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const std::vector<std::string> kLabels = {"NP", "VP", "S"};

Outcome kernel_oracle() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(1001);
  std::size_t pairs = 0, exact_fail = 0, rel_fail = 0;
  double worst_rel = 0.0;
  for (; pairs < 220; ++pairs) {
    const ParseTree a = oracle::random_tree(rng, 12, kLabels, 2);
    const ParseTree b = oracle::random_tree(rng, 12, kLabels, 2);
    for (auto mode : {MatchMode::kLabel, MatchMode::kProduction}) {
      KernelConfig one;
      one.decay_lambda = 1.0;
      one.match_mode = mode;
      if (tree_kernel(a, b, one) != oracle::fragment_kernel(a, b, 1.0, mode)) ++exact_fail;
      KernelConfig dec = one;
      dec.decay_lambda = 0.4;
      const double want = oracle::fragment_kernel(a, b, 0.4, mode);
      const double got = tree_kernel(a, b, dec);
      const double rel = want == 0.0 ? std::fabs(got) : std::fabs(got - want) / std::fabs(want);
      worst_rel = std::max(worst_rel, rel);
      if (rel > 1e-9) ++rel_fail;
    }
  }
  const double secs = seconds_since(start);
  o.require(exact_fail == 0, std::to_string(exact_fail) + " exact mismatches at lambda=1");
  o.require(rel_fail == 0, std::to_string(rel_fail) + " mismatches at lambda=0.4");
  o.require(secs < 30.0, "runtime " + fmt("%.1f s", secs));
  o.detail = std::to_string(pairs) + " pairs x 2 modes, worst rel err " + fmt("%.2e", worst_rel) + ", " +
             fmt("%.2f s", secs) + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome edit_distance_oracle() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(2002);
  std::size_t bad = 0, n = 600;
  for (std::size_t i = 0; i < n; ++i) {
    const ParseTree a = oracle::random_tree(rng, 6, kLabels);
    const ParseTree b = oracle::random_tree(rng, 6, kLabels);
    if (tree_edit_distance(a, b) != oracle::brute_edit_distance(a, b)) ++bad;
  }
  const double secs = seconds_since(start);
  o.require(bad == 0, std::to_string(bad) + " mismatches");
  o.require(secs < 60.0, "runtime " + fmt("%.1f s", secs));
  o.detail = std::to_string(n) + " pairs, " + fmt("%.2f s", secs) + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome hungarian_oracle() {
  Outcome o;
  std::mt19937_64 rng(3003);
  std::uniform_int_distribution<int> size(1, 6), value(-50, 50);
  std::size_t bad = 0, n = 1200;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix m(size(rng), size(rng));
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = value(rng);
    }
    if (hungarian_assignment(m).total_cost != oracle::brute_assignment_cost(m)) ++bad;
  }
  o.require(bad == 0, std::to_string(bad) + " mismatches");
  o.detail = std::to_string(n) + " integer matrices up to 6x6" + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome normalization_invariants() {
  Outcome o;
  std::mt19937_64 rng(4004);
  std::size_t bad_self = 0, bad_sym = 0, bad_range = 0, n = 1200;
  for (std::size_t i = 0; i < n; ++i) {
    const ParseTree a = oracle::random_tree(rng, 15, kLabels);
    const ParseTree b = oracle::random_tree(rng, 15, kLabels);
    KernelConfig cfg;
    cfg.match_mode = i % 2 ? MatchMode::kLabel : MatchMode::kProduction;
    if (std::fabs(normalized_similarity(a, a, cfg) - 1.0) > 1e-12) ++bad_self;
    const double ab = normalized_similarity(a, b, cfg);
    if (ab != normalized_similarity(b, a, cfg)) ++bad_sym;
    if (ab < -1e-12 || ab > 1.0 + 1e-12) ++bad_range;
  }
  o.require(bad_self == 0, std::to_string(bad_self) + " self-similarities != 1");
  o.require(bad_sym == 0, std::to_string(bad_sym) + " asymmetric pairs");
  o.require(bad_range == 0, std::to_string(bad_range) + " values outside [0,1]");
  o.detail = std::to_string(n) + " pairs" + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome bm25_closed_form() {
  Outcome o;
  const std::vector<std::vector<std::string>> corpus = {{"rotor", "speed"}, {"blood", "pressure"}};
  const Bm25Index idx = Bm25Index::build(corpus, {1.5, 0.75});
  const double s = idx.score(std::vector<std::string>{"rotor"}, 0);
  o.require(std::fabs(s - std::log(2.0)) <= 1e-9, "score " + fmt("%.12f", s));
  const double z = idx.score(std::vector<std::string>{"cough"}, 0);
  o.require(z == 0.0, "zero-overlap score " + fmt("%.3g", z));
  o.detail = "score " + fmt("%.12f", s) + " vs ln 2 " + fmt("%.12f", std::log(2.0)) + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

RetrievalResult picked(const std::string& q, const std::vector<std::string>& ids) {
  RetrievalResult r;
  r.query_id = q;
  r.k = ids.size();
  for (const auto& id : ids) r.selected.push_back({id, 0.0});
  return r;
}

Outcome tor_exactness() {
  Outcome o;
  const std::vector<SentenceRecord> demos = {{"d1", "", "w", {"a", "x"}}, {"d2", "", "w", {"y"}}, {"d3", "", "w", {"b"}}};
  const std::vector<SentenceRecord> queries = {{"q0", "", "h", {"z"}}, {"q5", "", "h", {"a", "b"}},
                                               {"q1", "", "h", {"a", "b"}}, {"qe", "", "h", {}}};
  const std::vector<RetrievalResult> r = {picked("q0", {"d1", "d2"}), picked("q5", {"d1", "d2"}),
                                          picked("q1", {"d1", "d3"}), picked("qe", {"d1"})};
  const TorReport t = term_overlap_ratio(r, demos, queries);
  o.require(t.per_query.size() == 3 && t.per_query[0].tor == 0.0 && t.per_query[1].tor == 0.5 &&
                t.per_query[2].tor == 1.0,
            "hand values differ");
  o.require(t.skipped == std::vector<std::string>{"qe"}, "empty-gold query not tallied");

  std::mt19937_64 rng(6006);
  std::uniform_int_distribution<int> term(0, 9), count(0, 3);
  std::size_t violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SentenceRecord> ds;
    for (int j = 0; j < 8; ++j) {
      SentenceRecord d{"d" + std::to_string(j), "", "w", {}};
      for (int c = count(rng); c > 0; --c) {
        const auto s = "t" + std::to_string(term(rng));
        if (std::find(d.terms.begin(), d.terms.end(), s) == d.terms.end()) d.terms.push_back(s);
      }
      ds.push_back(d);
    }
    const std::vector<SentenceRecord> qs = {{"q", "", "h", {"t" + std::to_string(term(rng)), "t" + std::to_string(10 + term(rng) % 2)}}};
    std::vector<std::string> ids;
    double prev = 0.0;
    for (int j = 0; j < 8; ++j) {
      ids.push_back("d" + std::to_string(j));
      const double now = term_overlap_ratio(std::vector{picked("q", ids)}, ds, qs).mean_tor;
      if (now < prev) ++violations;
      prev = now;
    }
  }
  o.require(violations == 0, std::to_string(violations) + " monotonicity violations");
  o.detail = "hand values {0, 0.5, 1}, 1 empty-gold query tallied, 100 monotone fixtures" +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome statistics() {
  Outcome o;
  std::mt19937_64 rng(7007);
  std::uniform_int_distribution<int> len(3, 40), small(0, 5);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  int series = 0;
  while (series < 100) {
    const int n = len(rng);
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
      xs[i] = series % 2 ? small(rng) : normal(rng);
      ys[i] = series % 3 ? small(rng) : normal(rng);
    }
    double got;
    try {
      got = spearman(xs, ys);
    } catch (const Error&) {
      continue;  // constant draw; resample
    }
    worst = std::max(worst, std::fabs(got - oracle::midrank_pearson(xs, ys)));
    ++series;
  }
  o.require(worst <= 1e-12, "spearman off by " + fmt("%.2e", worst));

  std::vector<MatchCounts> mixed(60);
  std::uniform_int_distribution<int> c(0, 3);
  for (auto& m : mixed) m = {std::size_t(c(rng)), std::size_t(c(rng)), std::size_t(c(rng))};
  const BootstrapCi a = bootstrap_ci(mixed, 10000, 0.95, 42, 1);
  const BootstrapCi b = bootstrap_ci(mixed, 10000, 0.95, 42, 4);
  o.require(a.f1.lo == b.f1.lo && a.f1.hi == b.f1.hi && a.precision.lo == b.precision.lo, "CI not deterministic");
  const BootstrapCi flat = bootstrap_ci(std::vector<MatchCounts>(25, MatchCounts{3, 1, 2}), 10000, 0.95, 1);
  o.require(flat.f1.width() == 0.0 && flat.precision.width() == 0.0 && flat.recall.width() == 0.0,
            "constant data gives nonzero width");

  const auto start = Clock::now();
  const double p = 0.5;
  std::bernoulli_distribution hit(p);
  int covered = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    std::vector<MatchCounts> corpus(100);
    for (auto& m : corpus) m = hit(rng) ? MatchCounts{1, 0, 0} : MatchCounts{0, 1, 1};
    covered += bootstrap_ci(corpus, 10000, 0.95, 1000 + t).f1.contains(p);
  }
  const double coverage = covered / double(trials);
  const double secs = seconds_since(start);
  o.require(coverage >= 0.92 && coverage <= 0.975, "coverage " + fmt("%.3f", coverage));
  o.require(secs < 120.0, "coverage study took " + fmt("%.1f s", secs));
  o.detail = "spearman max err " + fmt("%.1e", worst) + ", coverage " + fmt("%.3f", coverage) + " over 500 trials in " +
             fmt("%.1f s", secs) + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome paired_significance() {
  Outcome o;
  std::mt19937_64 rng(8008);
  std::uniform_int_distribution<int> d(0, 2), size(4, 12);
  double worst_perm = 0.0, worst_exact = 0.0;
  int corpora = 0;
  for (; corpora < 24; ++corpora) {
    const std::size_t n = corpora < 4 ? 12 : size(rng);
    std::vector<MatchCounts> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = {std::size_t(d(rng)), std::size_t(d(rng)), std::size_t(d(rng))};
      b[i] = {std::size_t(d(rng)), std::size_t(d(rng)), std::size_t(d(rng))};
    }
    const double got = paired_bootstrap_pvalue(a, b, 10000, corpora);
    worst_perm = std::max(worst_perm, std::fabs(got - oracle::sign_permutation_pvalue(a, b)));
    if (n <= 10) worst_exact = std::max(worst_exact, std::fabs(paired_bootstrap_pvalue(a, b, 100000, corpora) -
                                                               oracle::exact_bootstrap_pvalue(a, b)));
  }
  o.require(worst_exact <= 0.02, "max |p - exact bootstrap p| = " + fmt("%.3f", worst_exact));
  o.require(worst_perm <= 0.02, "max |p - sign-permutation p| = " + fmt("%.3f", worst_perm));
  const std::vector<MatchCounts> same = {{1, 2, 0}, {0, 0, 3}, {2, 1, 1}};
  const double p_same = paired_bootstrap_pvalue(same, same);
  o.require(p_same >= 0.95, "identical runs p = " + fmt("%.3f", p_same));
  o.detail = std::to_string(corpora) + " corpora of 4-12 sentences; max err vs exact bootstrap " +
             fmt("%.3f", worst_exact) + ", vs sign permutation " + fmt("%.3f", worst_perm) + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

ExperimentConfig pipeline_config(const std::string& url, const fs::path& out, std::size_t k) {
  ExperimentConfig c;
  c.demo_corpus = oracle::data_path("demos.jsonl");
  c.query_corpus = oracle::data_path("queries.jsonl");
  c.demo_treebank = oracle::data_path("demo_trees.tsv");
  c.query_treebank = oracle::data_path("query_trees.tsv");
  c.method = RetrievalMethod::kFastKassim;
  c.k = k;
  c.model.endpoint = url;
  c.model.model_name = "mock";
  c.output = out;
  return c;
}

Outcome end_to_end() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "termret_acceptance";
  fs::remove_all(root);
  MockLlmOptions opts;
  opts.queries = load_corpus(oracle::data_path("queries.jsonl")).records;
  for (auto mode : {MockMode::kLastDemoEcho, MockMode::kGoldEcho, MockMode::kNoTerm}) {
    opts.mode = mode;
    MockLlmServer server(opts);
    for (std::size_t k : {10u, 5u}) {
      const ExperimentConfig c = pipeline_config(server.base_url(), root / std::to_string(k), k);
      RunPaths p1, p2;
      const ExperimentReport r = run_experiment(c, {}, &p1);
      run_experiment(c, {}, &p2);
      const bool same = read_file(p1.report_json) == read_file(p2.report_json) &&
                        read_file(p1.report_text) == read_file(p2.report_text);
      o.require(same, "k=" + std::to_string(k) + " reports differ");
      const auto& m = r.runs[0];
      if (mode == MockMode::kGoldEcho) o.require(m.metrics.f1 == 1.0, "gold-echo F1 " + fmt("%.3f", m.metrics.f1));
      if (mode == MockMode::kNoTerm) {
        o.require(m.metrics.f1 == 0.0 && m.totals.fp == 0, "no-term F1/fp wrong");
      }
      if (mode == MockMode::kLastDemoEcho) {
        const auto retrieval = parse_retrieval(read_file(p1.dir / "retrieval-fastkassim.jsonl"));
        const double want = oracle::replay_top_demo_f1(retrieval, load_corpus(c.demo_corpus).records, opts.queries);
        o.require(m.metrics.f1 == want, "echo F1 differs from replay oracle");
      }
    }
  }
  o.detail = "fastkassim k=10 and k=5, byte-identical reruns; gold-echo F1=1, no-term F1=0 fp=0, echo = replay" +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome prompt_protocol() {
  Outcome o;
  std::mt19937_64 rng(1010);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ-'./0123456789";
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1), words(1, 4), len(1, 9), count(0, 8);
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> terms;
    const std::size_t n = count(rng);
    while (terms.size() < n) {
      std::string t;
      for (std::size_t w = words(rng), i = 0; i < w; ++i) {
        if (i) t += ' ';
        for (std::size_t l = len(rng), j = 0; j < l; ++j) t += alphabet[ch(rng)];
      }
      std::string lower = t;
      for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (lower == "no term" || lower == "no term." || std::find(terms.begin(), terms.end(), t) != terms.end()) continue;
      terms.push_back(t);
    }
    const SentenceRecord demo{"d", "Sentence.", "wind_energy", terms};
    const std::string rendered = render_demonstration(demo);
    const std::string line = rendered.substr(rendered.rfind("\nTerms: ") + 8);
    if (parse_response(line).terms != terms) ++bad;
  }
  o.require(bad == 0, std::to_string(bad) + " of 1000 term sets do not round-trip");

  const SentenceRecord wind{"d01", "The rotor speed reading is logged every minute.", "wind_energy", {"rotor speed"}};
  const SentenceRecord query{"q1", "The blood pressure measurement is recorded daily.", "heart_failure", {"blood pressure"}};
  const SentenceRecord* demos[] = {&wind};
  const PromptBundle p = build_prompt(render_instruction(default_instruction_template(), query.domain), demos, query);
  const std::string demo_text =
      "Given sentence from the wind energy domain: The rotor speed reading is logged every minute.\nTerms: rotor speed";
  const std::string query_text =
      "Given sentence from the heart failure domain: The blood pressure measurement is recorded daily.";
  const auto demo_at = p.text.find(demo_text);
  const auto query_at = p.text.find(query_text);
  o.require(demo_at != std::string::npos && query_at != std::string::npos && demo_at < query_at &&
                query_at + query_text.size() == p.text.size(),
            "Figure-1 prompt layout wrong");
  o.detail = "1000 random comma-free term sets round-trip; Figure-1 demo precedes the query line" +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome corpus_stats_check() {
  Outcome o;
  const CorpusStats s = corpus_stats(load_corpus(oracle::data_path("stats_fixture.jsonl")).records);
  o.require(s.total_words == 16 && s.total_terms == 3 && s.avg_words == 16.0 / 3.0 && s.avg_terms == 1.0,
            "synthetic fixture averages wrong");
  std::string acter;
  const struct {
    const char* env;
    const char* name;
    long words, terms;
  } splits[] = {{"TERMRET_ACTER_TRAIN", "train", 19, 2},
                {"TERMRET_ACTER_VALIDATION", "validation", 17, 3},
                {"TERMRET_ACTER_TEST", "test", 19, 4}};
  for (const auto& sp : splits) {
    const char* path = std::getenv(sp.env);
    if (!path || !*path) continue;
    const CorpusStats a = corpus_stats(load_corpus(path).records);
    acter += std::string(acter.empty() ? "" : ", ") + sp.name + " " + std::to_string(a.rounded_words()) + "/" +
             std::to_string(a.rounded_terms());
    o.require(a.rounded_words() == sp.words && a.rounded_terms() == sp.terms,
              std::string("ACTER ") + sp.name + " expected " + std::to_string(sp.words) + "/" +
                  std::to_string(sp.terms));
  }
  o.detail = "synthetic fixture 16/3 words, 3/3 terms exact; " +
             (acter.empty() ? std::string("ACTER comparison skipped (set TERMRET_ACTER_TRAIN/_VALIDATION/_TEST)")
                            : "ACTER " + acter) +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"kernel-oracle", kernel_oracle},
      {"edit-distance-oracle", edit_distance_oracle},
      {"hungarian-oracle", hungarian_oracle},
      {"normalization-invariants", normalization_invariants},
      {"bm25-closed-form", bm25_closed_form},
      {"tor-exactness", tor_exactness},
      {"statistics", statistics},
      {"paired-significance", paired_significance},
      {"end-to-end-determinism", end_to_end},
      {"prompt-protocol", prompt_protocol},
      {"corpus-stats", corpus_stats_check},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return std::min(failed, 100);
}
