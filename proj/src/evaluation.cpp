#include "termret/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "termret/error.hpp"
#include "termret/util.hpp"

namespace termret {
namespace {

// Sign of F1(a) - F1(b), decided on integers; 2PR/(P+R) drifts on ties.
int compare_f1(const MatchCounts& a, const MatchCounts& b) {
  using Wide = unsigned __int128;
  const Wide lhs = Wide(2 * a.tp) * Wide(2 * b.tp + b.fp + b.fn);
  const Wide rhs = Wide(2 * b.tp) * Wide(2 * a.tp + a.fp + a.fn);
  return lhs == rhs ? 0 : (lhs > rhs ? 1 : -1);
}

MatchCounts total_of(std::span<const MatchCounts> counts) {
  MatchCounts t;
  for (const auto& c : counts) t += c;
  return t;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Linear interpolation between order statistics of a sorted sample.
double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Interval percentile_interval(std::vector<double> samples, double level) {
  std::sort(samples.begin(), samples.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile(samples, tail), quantile(samples, 1.0 - tail)};
}

MatchCounts resample_totals(std::span<const MatchCounts> counts, std::uint64_t seed, std::size_t r) {
  SplitMix64 gen(substream_seed(seed, r));
  MatchCounts total;
  const std::size_t n = counts.size();
  for (std::size_t i = 0; i < n; ++i) total += counts[uniform_below(gen, n)];
  return total;
}

}  // namespace

MatchCounts match_counts(std::span<const std::string> predicted, std::span<const std::string> gold) {
  // Both sides are sets; repeats count once.
  auto unique = [](std::span<const std::string> terms) {
    std::vector<std::string_view> out;
    for (const auto& t : terms) {
      if (std::none_of(out.begin(), out.end(), [&](std::string_view u) { return same_term(t, u); })) out.push_back(t);
    }
    return out;
  };
  const auto p = unique(predicted);
  const auto g = unique(gold);
  MatchCounts c;
  for (auto t : p) {
    if (std::any_of(g.begin(), g.end(), [&](std::string_view u) { return same_term(t, u); })) ++c.tp;
  }
  c.fp = p.size() - c.tp;
  c.fn = g.size() - c.tp;
  return c;
}

Prf prf(const MatchCounts& totals) {
  Prf out;
  out.precision = ratio(totals.tp, totals.tp + totals.fp);
  out.recall = ratio(totals.tp, totals.tp + totals.fn);
  const double denom = out.precision + out.recall;
  out.f1 = denom == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / denom;
  return out;
}

Prf micro_prf(std::span<const MatchCounts> counts) {
  MatchCounts total;
  for (const auto& c : counts) total += c;
  return prf(total);
}

BootstrapCi bootstrap_ci(std::span<const MatchCounts> counts, std::size_t resamples, double level,
                         std::uint64_t seed, std::size_t parallelism) {
  if (counts.empty()) throw Error(ErrorKind::kInvalidArgument, "bootstrap needs at least one sentence");
  if (resamples == 0) throw Error(ErrorKind::kInvalidArgument, "bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::kInvalidArgument, "confidence level must be in (0, 1)");
  std::vector<double> p(resamples), r(resamples), f(resamples);
  parallel_for(resamples, parallelism, [&](std::size_t i) {
    const Prf m = prf(resample_totals(counts, seed, i));
    p[i] = m.precision;
    r[i] = m.recall;
    f[i] = m.f1;
  });
  BootstrapCi ci;
  ci.precision = percentile_interval(std::move(p), level);
  ci.recall = percentile_interval(std::move(r), level);
  ci.f1 = percentile_interval(std::move(f), level);
  ci.level = level;
  ci.resamples = resamples;
  ci.seed = seed;
  return ci;
}

double paired_bootstrap_pvalue(std::span<const MatchCounts> a, std::span<const MatchCounts> b,
                               std::size_t resamples, std::uint64_t seed, std::size_t parallelism) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kMisalignedRuns,
                "runs cover " + std::to_string(a.size()) + " and " + std::to_string(b.size()) + " sentences");
  }
  if (a.empty()) throw Error(ErrorKind::kInvalidArgument, "no sentences to compare");
  if (resamples == 0) throw Error(ErrorKind::kInvalidArgument, "need at least one resample");
  const int observed = compare_f1(total_of(a), total_of(b));
  if (observed == 0) return 1.0;

  const std::size_t n = a.size();
  std::vector<char> contradicts(resamples, 0);
  parallel_for(resamples, parallelism, [&](std::size_t r) {
    SplitMix64 gen(substream_seed(seed, r));
    MatchCounts ta, tb;
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = uniform_below(gen, n);
      ta += a[j];
      tb += b[j];
    }
    contradicts[r] = compare_f1(ta, tb) != observed;
  });
  const auto count = std::count(contradicts.begin(), contradicts.end(), 1);
  return std::min(1.0, 2.0 * static_cast<double>(count) / static_cast<double>(resamples));
}

TorReport term_overlap_ratio(std::span<const RetrievalResult> retrieval, std::span<const SentenceRecord> demos,
                             std::span<const SentenceRecord> queries) {
  std::unordered_map<std::string_view, const SentenceRecord*> demo_by_id, query_by_id;
  for (const auto& d : demos) demo_by_id.emplace(d.id, &d);
  for (const auto& q : queries) query_by_id.emplace(q.id, &q);

  TorReport report;
  double sum = 0.0;
  for (const auto& result : retrieval) {
    const auto qit = query_by_id.find(result.query_id);
    if (qit == query_by_id.end()) {
      throw Error(ErrorKind::kMissingResource, "retrieval names unknown query '" + result.query_id + "'");
    }
    std::vector<std::string> pool;
    for (const auto& s : result.selected) {
      const auto dit = demo_by_id.find(s.demo_id);
      if (dit == demo_by_id.end()) {
        throw Error(ErrorKind::kUnknownDemoId, "query '" + result.query_id + "' retrieved unknown demo '" + s.demo_id + "'");
      }
      pool.insert(pool.end(), dit->second->terms.begin(), dit->second->terms.end());
    }
    const auto& gold = qit->second->terms;
    if (gold.empty()) {
      report.skipped.push_back(result.query_id);
      continue;
    }
    std::size_t hit = 0;
    for (const auto& g : gold) {
      if (std::any_of(pool.begin(), pool.end(), [&](const std::string& t) { return same_term(g, t); })) ++hit;
    }
    const double value = static_cast<double>(hit) / static_cast<double>(gold.size());
    report.per_query.push_back({result.query_id, value});
    sum += value;
  }
  report.mean_tor = report.per_query.empty() ? 0.0 : sum / static_cast<double>(report.per_query.size());
  return report;
}

std::vector<double> mid_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorKind::kLengthMismatch,
                "series of length " + std::to_string(xs.size()) + " and " + std::to_string(ys.size()));
  }
  if (xs.size() < 2) throw Error(ErrorKind::kLengthMismatch, "correlation needs at least two points");
  const auto rx = mid_ranks(xs);
  const auto ry = mid_ranks(ys);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::kConstantSeries, "correlation of a constant series is undefined");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace termret
