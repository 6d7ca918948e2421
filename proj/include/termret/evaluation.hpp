#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "termret/corpus.hpp"
#include "termret/retrieval.hpp"

namespace termret {

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const MatchCounts&) const = default;
};

// The single term-equality predicate used for scoring and for overlap: exact,
// case-sensitive, no normalization.
inline bool same_term(std::string_view a, std::string_view b) { return a == b; }

MatchCounts match_counts(std::span<const std::string> predicted, std::span<const std::string> gold);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const Prf&) const = default;
};

// 0/0 is taken as 0 everywhere.
Prf prf(const MatchCounts& totals);
Prf micro_prf(std::span<const MatchCounts> counts);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return lo <= x && x <= hi; }
  double width() const { return hi - lo; }
};

struct BootstrapCi {
  Interval precision;
  Interval recall;
  Interval f1;
  double level = 0.95;
  std::size_t resamples = 0;
  std::uint64_t seed = 0;
};

// Percentile intervals from resampling sentences with replacement. Resample r
// draws from substream (seed, r), so the result does not depend on
// `parallelism`.
BootstrapCi bootstrap_ci(std::span<const MatchCounts> counts, std::size_t resamples = 10000, double level = 0.95,
                         std::uint64_t seed = 0, std::size_t parallelism = 1);

// Two-sided paired bootstrap p-value for F1(A) - F1(B): twice the fraction of
// resamples whose difference does not share the observed sign, clamped to
// [0, 1]; 1 when the observed difference is zero. Throws MisalignedRuns.
double paired_bootstrap_pvalue(std::span<const MatchCounts> a, std::span<const MatchCounts> b,
                               std::size_t resamples = 10000, std::uint64_t seed = 0, std::size_t parallelism = 1);

struct TorEntry {
  std::string query_id;
  double tor = 0.0;
};

struct TorReport {
  std::vector<TorEntry> per_query;  // queries with a non-empty gold set, in retrieval order
  std::vector<std::string> skipped;  // queries with an empty gold set
  double mean_tor = 0.0;
  std::size_t n_included() const { return per_query.size(); }
};

// Fraction of each query's gold terms found among the union of its retrieved
// demonstrations' terms, averaged over queries with gold terms. Throws
// UnknownDemoId / MissingResource for unresolvable ids.
TorReport term_overlap_ratio(std::span<const RetrievalResult> retrieval, std::span<const SentenceRecord> demos,
                             std::span<const SentenceRecord> queries);

// Average (fractional) ranks, 1-based.
std::vector<double> mid_ranks(std::span<const double> values);

// Pearson correlation of mid-ranks. Throws LengthMismatch or ConstantSeries.
double spearman(std::span<const double> xs, std::span<const double> ys);

}  // namespace termret
