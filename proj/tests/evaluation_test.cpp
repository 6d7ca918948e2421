#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "termret/error.hpp"
#include "termret/evaluation.hpp"

namespace {

using namespace termret;
using Terms = std::vector<std::string>;

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kInvalidArgument;
}

TEST(MatchCounts, SetArithmetic) {
  EXPECT_EQ(match_counts(Terms{"a", "b"}, Terms{"b", "c"}), (MatchCounts{1, 1, 1}));
  EXPECT_EQ(match_counts(Terms{}, Terms{}), (MatchCounts{0, 0, 0}));
  EXPECT_EQ(match_counts(Terms{"Cough"}, Terms{"cough"}), (MatchCounts{0, 1, 1}));
  EXPECT_EQ(match_counts(Terms{"a", "a"}, Terms{"a"}), (MatchCounts{1, 0, 0}));
}

TEST(Prf, Arithmetic) {
  const std::vector<MatchCounts> c = {{1, 1, 1}, {1, 0, 0}};
  const Prf m = micro_prf(c);
  EXPECT_DOUBLE_EQ(m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.f1, 2.0 / 3.0);
  EXPECT_EQ(micro_prf(std::vector<MatchCounts>{{0, 0, 0}}), (Prf{0, 0, 0}));
  EXPECT_EQ(prf({5, 0, 0}), (Prf{1, 1, 1}));
  EXPECT_EQ(prf({0, 3, 0}), (Prf{0, 0, 0}));
}

TEST(Bootstrap, ConstantDataHasZeroWidth) {
  const std::vector<MatchCounts> c(20, MatchCounts{2, 1, 1});
  const BootstrapCi ci = bootstrap_ci(c, 2000, 0.95, 1);
  EXPECT_DOUBLE_EQ(ci.f1.lo, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(ci.f1.hi, 2.0 / 3.0);
  EXPECT_EQ(ci.precision.width(), 0.0);
}

TEST(Bootstrap, DeterministicAcrossThreads) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> d(0, 3);
  std::vector<MatchCounts> c(40);
  for (auto& x : c) x = {std::size_t(d(rng)), std::size_t(d(rng)), std::size_t(d(rng))};
  const BootstrapCi a = bootstrap_ci(c, 3000, 0.95, 7, 1);
  const BootstrapCi b = bootstrap_ci(c, 3000, 0.95, 7, 3);
  EXPECT_EQ(a.f1.lo, b.f1.lo);
  EXPECT_EQ(a.f1.hi, b.f1.hi);
  EXPECT_EQ(a.recall.lo, b.recall.lo);
  const BootstrapCi other = bootstrap_ci(c, 3000, 0.95, 8, 1);
  EXPECT_TRUE(other.f1.lo != a.f1.lo || other.f1.hi != a.f1.hi);
  const double f1 = micro_prf(c).f1;
  EXPECT_LE(a.f1.lo, f1);
  EXPECT_GE(a.f1.hi, f1);
}

TEST(Bootstrap, BadArguments) {
  const std::vector<MatchCounts> c(3, MatchCounts{1, 0, 0});
  EXPECT_THROW(bootstrap_ci(c, 0), Error);
  EXPECT_THROW(bootstrap_ci(c, 100, 1.0), Error);
  EXPECT_THROW(bootstrap_ci(std::vector<MatchCounts>{}, 100), Error);
}

TEST(Bootstrap, CoverageSmallStudy) {
  // Each sentence has one gold term, predicted correctly with probability p,
  // so corpus F1 estimates p.
  const double p = 0.5;
  std::mt19937_64 rng(99);
  std::bernoulli_distribution hit(p);
  int covered = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    std::vector<MatchCounts> c(100);
    for (auto& x : c) x = hit(rng) ? MatchCounts{1, 0, 0} : MatchCounts{0, 1, 1};
    covered += bootstrap_ci(c, 1000, 0.95, t).f1.contains(p);
  }
  EXPECT_GE(covered, 85);
  EXPECT_LE(covered, 100);
}

TEST(PairedPValue, IdenticalRuns) {
  const std::vector<MatchCounts> a = {{1, 1, 0}, {2, 0, 1}, {0, 1, 1}};
  EXPECT_EQ(paired_bootstrap_pvalue(a, a), 1.0);
}

TEST(PairedPValue, MaximalSeparation) {
  const std::vector<MatchCounts> perfect(50, MatchCounts{2, 0, 0});
  const std::vector<MatchCounts> wrong(50, MatchCounts{0, 2, 2});
  EXPECT_LT(paired_bootstrap_pvalue(perfect, wrong), 0.01);
  EXPECT_LT(oracle::sign_permutation_pvalue(std::span(perfect).first(12), std::span(wrong).first(12)), 0.01);
}

TEST(PairedPValue, Misaligned) {
  const std::vector<MatchCounts> a(3), b(4);
  EXPECT_EQ(kind_of([&] { paired_bootstrap_pvalue(a, b); }), ErrorKind::kMisalignedRuns);
}

TEST(PairedPValue, MatchesExactBootstrapDistribution) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> d(0, 2);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t n = 6 + trial;
    std::vector<MatchCounts> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = {std::size_t(d(rng)), std::size_t(d(rng)), std::size_t(d(rng))};
      b[i] = {std::size_t(d(rng)), std::size_t(d(rng)), std::size_t(d(rng))};
    }
    const double exact = oracle::exact_bootstrap_pvalue(a, b);
    EXPECT_NEAR(paired_bootstrap_pvalue(a, b, 40000, trial), exact, 0.02) << "n=" << n;
  }
}

TEST(PairedPValue, OracleSanity) {
  // Hand case: one sentence only A gets right, others tie.
  const std::vector<MatchCounts> a = {{1, 0, 0}, {1, 0, 0}};
  const std::vector<MatchCounts> b = {{0, 1, 1}, {1, 0, 0}};
  // Swaps: none or second only keep |delta| = 1/3; first swapped flips sign.
  EXPECT_DOUBLE_EQ(oracle::sign_permutation_pvalue(a, b), 1.0);
  // Resamples {1,1} (1/4) contradict; {0,0}, {0,1}x2 do not: p = 2 * 1/4.
  EXPECT_DOUBLE_EQ(oracle::exact_bootstrap_pvalue(a, b), 0.5);
}

RetrievalResult picked(const std::string& q, std::vector<std::string> ids) {
  RetrievalResult r;
  r.query_id = q;
  r.k = ids.size();
  for (auto& id : ids) r.selected.push_back({id, 0.0});
  return r;
}

TEST(Tor, HandValues) {
  const std::vector<SentenceRecord> demos = {{"d1", "", "w", {"a", "x"}}, {"d2", "", "w", {"y"}}, {"d3", "", "w", {"b"}}};
  const std::vector<SentenceRecord> queries = {{"q1", "", "h", {"a", "b"}}, {"q2", "", "h", {"z"}},
                                               {"q3", "", "h", {}}, {"q4", "", "h", {"a", "b"}}};
  const std::vector<RetrievalResult> r = {picked("q1", {"d1", "d2"}), picked("q2", {"d1"}), picked("q3", {"d1"}),
                                          picked("q4", {"d1", "d3"})};
  const TorReport t = term_overlap_ratio(r, demos, queries);
  ASSERT_EQ(t.per_query.size(), 3u);
  EXPECT_EQ(t.per_query[0].tor, 0.5);
  EXPECT_EQ(t.per_query[1].tor, 0.0);
  EXPECT_EQ(t.per_query[2].tor, 1.0);
  EXPECT_EQ(t.skipped, std::vector<std::string>{"q3"});
  EXPECT_DOUBLE_EQ(t.mean_tor, 0.5);
}

TEST(Tor, NoOverlapIsZero) {
  const std::vector<SentenceRecord> demos = {{"d1", "", "w", {"rotor speed"}}};
  const std::vector<SentenceRecord> queries = {{"q1", "", "h", {"blood pressure"}}};
  const std::vector<RetrievalResult> r = {picked("q1", {"d1"})};
  EXPECT_EQ(term_overlap_ratio(r, demos, queries).mean_tor, 0.0);
}

TEST(Tor, CaseSensitiveLikeScoring) {
  const std::vector<SentenceRecord> demos = {{"d1", "", "w", {"Cough"}}};
  const std::vector<SentenceRecord> queries = {{"q1", "", "h", {"cough"}}};
  EXPECT_EQ(term_overlap_ratio(std::vector{picked("q1", {"d1"})}, demos, queries).mean_tor, 0.0);
}

TEST(Tor, UnknownIds) {
  const std::vector<SentenceRecord> demos = {{"d1", "", "w", {"a"}}};
  const std::vector<SentenceRecord> queries = {{"q1", "", "h", {"a"}}};
  EXPECT_EQ(kind_of([&] { term_overlap_ratio(std::vector{picked("q1", {"dX"})}, demos, queries); }),
            ErrorKind::kUnknownDemoId);
  EXPECT_EQ(kind_of([&] { term_overlap_ratio(std::vector{picked("qX", {"d1"})}, demos, queries); }),
            ErrorKind::kMissingResource);
}

TEST(Tor, MonotoneUnderAddedDemonstrations) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> term(0, 9), count(0, 3);
  auto terms = [&] {
    std::vector<std::string> t;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      auto s = "t" + std::to_string(term(rng));
      if (std::find(t.begin(), t.end(), s) == t.end()) t.push_back(s);
    }
    return t;
  };
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SentenceRecord> demos;
    for (int j = 0; j < 8; ++j) demos.push_back({"d" + std::to_string(j), "", "w", terms()});
    std::vector<SentenceRecord> queries = {{"q", "", "h", terms()}};
    if (queries[0].terms.empty()) queries[0].terms = {"t0"};
    std::vector<std::string> ids;
    double prev = 0.0;
    for (int j = 0; j < 8; ++j) {
      ids.push_back("d" + std::to_string(j));
      const double now = term_overlap_ratio(std::vector{picked("q", ids)}, demos, queries).mean_tor;
      EXPECT_GE(now, prev);
      prev = now;
    }
  }
}

TEST(Spearman, Basics) {
  EXPECT_DOUBLE_EQ(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{30, 20, 10}), -1.0);
  const std::vector<double> xs = {1, 2, 2, 3}, ys = {1, 3, 2, 4};
  EXPECT_NEAR(spearman(xs, ys), oracle::midrank_pearson(xs, ys), 1e-12);
  EXPECT_EQ(mid_ranks(std::vector<double>{5, 1, 5, 3}), (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Spearman, Errors) {
  EXPECT_EQ(kind_of([] { spearman(std::vector<double>{1, 2}, std::vector<double>{1}); }),
            ErrorKind::kLengthMismatch);
  EXPECT_EQ(kind_of([] { spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}); }),
            ErrorKind::kConstantSeries);
}

TEST(Spearman, MatchesMidRankPearson) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> len(3, 30), small(0, 4);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = len(rng);
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
      xs[i] = trial % 2 ? small(rng) : normal(rng);
      ys[i] = trial % 3 ? small(rng) : normal(rng);
    }
    try {
      EXPECT_NEAR(spearman(xs, ys), oracle::midrank_pearson(xs, ys), 1e-12);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConstantSeries);
    }
  }
}

}  // namespace
