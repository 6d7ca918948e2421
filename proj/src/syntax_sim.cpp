#include "termret/syntax_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "termret/error.hpp"
#include "termret/util.hpp"

namespace termret {
namespace {

bool same_production(const ParseTree& a, std::size_t i, const ParseTree& b, std::size_t j) {
  if (a.label(i) != b.label(j)) return false;
  const auto& ca = a.children(i);
  const auto& cb = b.children(j);
  if (ca.size() != cb.size()) return false;
  for (std::size_t k = 0; k < ca.size(); ++k) {
    if (a.label(ca[k]) != b.label(cb[k])) return false;
  }
  return true;
}

// Total order on trees used to evaluate K(a,b) and K(b,a) with the same
// summation order, which makes the kernel bit-for-bit symmetric.
bool tree_less(const ParseTree& a, const ParseTree& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.label(i) != b.label(i)) return a.label(i) < b.label(i);
    if (a.children(i) != b.children(i)) return a.children(i) < b.children(i);
  }
  return false;
}

double kernel_ordered(const ParseTree& a, const ParseTree& b, const KernelConfig& cfg) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const double lambda = cfg.decay_lambda;
  // delta(i, j); children carry larger preorder ids, so a reverse sweep sees
  // every child pair before its parents.
  std::vector<double> delta(n * m, 0.0);
  double total = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      double d = 0.0;
      if (cfg.match_mode == MatchMode::kProduction) {
        if (same_production(a, i, b, j)) {
          d = lambda;
          const auto& ca = a.children(i);
          const auto& cb = b.children(j);
          for (std::size_t k = 0; k < ca.size(); ++k) d *= 1.0 + delta[ca[k] * m + cb[k]];
        }
      } else if (a.label(i) == b.label(j)) {
        d = lambda;
        const auto& ca = a.children(i);
        const auto& cb = b.children(j);
        const std::size_t common = std::min(ca.size(), cb.size());
        for (std::size_t k = 0; k < common; ++k) d *= 1.0 + delta[ca[k] * m + cb[k]];
      }
      delta[i * m + j] = d;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) total += delta[i * m + j];
  }
  return total;
}

struct PostorderView {
  std::vector<std::size_t> order;  // postorder position -> preorder id
  std::vector<std::size_t> lml;    // leftmost leaf (postorder position), 1-based
  std::vector<std::size_t> keyroots;
};

PostorderView postorder_view(const ParseTree& t) {
  PostorderView v;
  v.order = t.postorder();
  const std::size_t n = v.order.size();
  std::vector<std::size_t> pos_of(n);
  for (std::size_t p = 0; p < n; ++p) pos_of[v.order[p]] = p + 1;
  v.lml.assign(n + 1, 0);
  for (std::size_t p = 1; p <= n; ++p) {
    const std::size_t id = v.order[p - 1];
    v.lml[p] = t.is_leaf(id) ? p : v.lml[pos_of[t.children(id).front()]];
  }
  std::vector<bool> seen(n + 2, false);
  for (std::size_t p = n; p >= 1; --p) {
    if (!seen[v.lml[p]]) {
      v.keyroots.push_back(p);
      seen[v.lml[p]] = true;
    }
  }
  std::sort(v.keyroots.begin(), v.keyroots.end());
  return v;
}

// Rectangular min-cost assignment (rows <= cols) with row and column
// potentials; returns the column for each row.
std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<bool> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) col_of[p[j] - 1] = j - 1;
  }
  return col_of;
}

// Optimal cost of assigning every entry of the smaller side among the given
// rows and columns.
double optimal_cost(const Matrix& cost, const std::vector<std::size_t>& rows,
                    const std::vector<std::size_t>& cols) {
  if (rows.empty() || cols.empty()) return 0.0;
  const bool transpose = rows.size() > cols.size();
  const auto& r = transpose ? cols : rows;
  const auto& c = transpose ? rows : cols;
  Matrix sub(r.size(), c.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      sub(i, j) = transpose ? cost(c[j], r[i]) : cost(r[i], c[j]);
    }
  }
  const auto col_of = solve_assignment(sub);
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) total += sub(i, col_of[i]);
  return total;
}

bool cost_equal(double x, double y) {
  return std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)});
}

}  // namespace

void KernelConfig::validate() const {
  if (!(decay_lambda > 0.0 && decay_lambda <= 1.0)) {
    throw Error(ErrorKind::kConfig, "kernel decay must lie in (0, 1], got " + format_real(decay_lambda));
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::kDimensionMismatch, "matrix data does not match its shape");
  }
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

double tree_kernel(const ParseTree& a, const ParseTree& b, const KernelConfig& cfg) {
  cfg.validate();
  if (a.empty() || b.empty()) return 0.0;
  return tree_less(b, a) ? kernel_ordered(b, a, cfg) : kernel_ordered(a, b, cfg);
}

double normalized_similarity(const ParseTree& a, const ParseTree& b, const KernelConfig& cfg) {
  const double kaa = tree_kernel(a, a, cfg);
  const double kbb = tree_kernel(b, b, cfg);
  if (!(kaa > 0.0) || !(kbb > 0.0)) {
    throw Error(ErrorKind::kDegenerateTree, "self-kernel is zero (empty tree)");
  }
  const double kab = tree_kernel(a, b, cfg);
  const double sim = kab / std::sqrt(kaa * kbb);
  return std::clamp(sim, 0.0, 1.0);
}

std::size_t tree_edit_distance(const ParseTree& a, const ParseTree& b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  const PostorderView va = postorder_view(a);
  const PostorderView vb = postorder_view(b);
  const std::size_t n = a.size();
  const std::size_t m = b.size();

  std::vector<std::size_t> td((n + 1) * (m + 1), 0);
  auto tree_dist = [&](std::size_t i, std::size_t j) -> std::size_t& { return td[i * (m + 1) + j]; };

  std::vector<std::size_t> fd;
  for (std::size_t i : va.keyroots) {
    for (std::size_t j : vb.keyroots) {
      const std::size_t li = va.lml[i];
      const std::size_t lj = vb.lml[j];
      const std::size_t rows = i - li + 2;
      const std::size_t cols = j - lj + 2;
      fd.assign(rows * cols, 0);
      auto forest = [&](std::size_t x, std::size_t y) -> std::size_t& { return fd[x * cols + y]; };
      // Forest index x covers postorder nodes li..li+x-1.
      for (std::size_t x = 1; x < rows; ++x) forest(x, 0) = forest(x - 1, 0) + 1;
      for (std::size_t y = 1; y < cols; ++y) forest(0, y) = forest(0, y - 1) + 1;
      for (std::size_t x = 1; x < rows; ++x) {
        const std::size_t di = li + x - 1;
        for (std::size_t y = 1; y < cols; ++y) {
          const std::size_t dj = lj + y - 1;
          const std::size_t del = forest(x - 1, y) + 1;
          const std::size_t ins = forest(x, y - 1) + 1;
          if (va.lml[di] == li && vb.lml[dj] == lj) {
            const std::size_t relabel =
                a.label(va.order[di - 1]) == b.label(vb.order[dj - 1]) ? 0 : 1;
            forest(x, y) = std::min({del, ins, forest(x - 1, y - 1) + relabel});
            tree_dist(di, dj) = forest(x, y);
          } else {
            const std::size_t px = va.lml[di] - li;
            const std::size_t py = vb.lml[dj] - lj;
            forest(x, y) = std::min({del, ins, forest(px, py) + tree_dist(di, dj)});
          }
        }
      }
    }
  }
  return tree_dist(n, m);
}

double normalized_edit_similarity(const ParseTree& a, const ParseTree& b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  const double d = static_cast<double>(tree_edit_distance(a, b));
  return std::clamp(1.0 - d / static_cast<double>(longest), 0.0, 1.0);
}

Assignment hungarian_assignment(const Matrix& cost) {
  if (cost.rows() == 0 || cost.cols() == 0) throw Error(ErrorKind::kEmptyMatrix, "cost matrix is empty");
  for (double c : cost.data()) {
    if (!std::isfinite(c)) throw Error(ErrorKind::kInvalidArgument, "cost matrix has non-finite entries");
  }
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  const std::size_t pairs = std::min(n, m);

  std::vector<std::size_t> all_rows(n), all_cols(m);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::iota(all_cols.begin(), all_cols.end(), 0);
  const double best = optimal_cost(cost, all_rows, all_cols);

  // Fix pairs greedily in lexicographic order, keeping a candidate only if an
  // optimal completion still exists.
  Assignment out;
  std::vector<bool> col_used(m, false);
  double fixed_cost = 0.0;
  std::size_t next_row = 0;
  while (out.pairs.size() < pairs) {
    bool placed = false;
    for (std::size_t r = next_row; r < n && !placed; ++r) {
      for (std::size_t c = 0; c < m && !placed; ++c) {
        if (col_used[c]) continue;
        std::vector<std::size_t> rest_rows, rest_cols;
        for (std::size_t rr = r + 1; rr < n; ++rr) rest_rows.push_back(rr);
        for (std::size_t cc = 0; cc < m; ++cc) {
          if (!col_used[cc] && cc != c) rest_cols.push_back(cc);
        }
        const std::size_t still_needed = pairs - out.pairs.size() - 1;
        if (std::min(rest_rows.size(), rest_cols.size()) < still_needed) continue;
        const double total = fixed_cost + cost(r, c) + optimal_cost(cost, rest_rows, rest_cols);
        if (cost_equal(total, best)) {
          out.pairs.emplace_back(r, c);
          col_used[c] = true;
          fixed_cost += cost(r, c);
          next_row = r + 1;
          placed = true;
        }
      }
    }
    if (!placed) throw Error(ErrorKind::kInvalidArgument, "assignment tie-break failed to converge");
  }
  out.total_cost = 0.0;
  for (const auto& [r, c] : out.pairs) out.total_cost += cost(r, c);
  return out;
}

double document_similarity(std::span<const ParseTree> doc_a, std::span<const ParseTree> doc_b,
                           DocumentMethod method, const KernelConfig& cfg) {
  if (doc_a.empty() || doc_b.empty()) throw Error(ErrorKind::kEmptyDocument, "document has no sentences");
  const SimilarityMatrix sims = syntactic_similarity_matrix(doc_a, doc_b, method, cfg);
  Matrix cost(sims.values.rows(), sims.values.cols());
  for (std::size_t r = 0; r < cost.rows(); ++r) {
    for (std::size_t c = 0; c < cost.cols(); ++c) cost(r, c) = 1.0 - sims.values(r, c);
  }
  const Assignment assignment = hungarian_assignment(cost);
  double total = 0.0;
  for (const auto& [r, c] : assignment.pairs) total += sims.values(r, c);
  return total / static_cast<double>(assignment.pairs.size());
}

SimilarityMatrix syntactic_similarity_matrix(std::span<const ParseTree> queries,
                                             std::span<const ParseTree> demos,
                                             DocumentMethod method, const KernelConfig& cfg,
                                             std::size_t parallelism) {
  cfg.validate();
  SimilarityMatrix out;
  out.method = method == DocumentMethod::kFastKassim ? RetrievalMethod::kFastKassim : RetrievalMethod::kCassim;
  out.values = Matrix(queries.size(), demos.size());
  if (queries.empty() || demos.empty()) return out;

  // Self-kernels are shared across the whole row/column.
  std::vector<double> self_q, self_d;
  if (method == DocumentMethod::kFastKassim && cfg.normalize) {
    self_q.resize(queries.size());
    self_d.resize(demos.size());
    parallel_for(queries.size(), parallelism, [&](std::size_t i) { self_q[i] = tree_kernel(queries[i], queries[i], cfg); });
    parallel_for(demos.size(), parallelism, [&](std::size_t j) { self_d[j] = tree_kernel(demos[j], demos[j], cfg); });
  }
  const std::size_t cols = demos.size();
  parallel_for(queries.size() * cols, parallelism, [&](std::size_t cell) {
    const std::size_t i = cell / cols;
    const std::size_t j = cell % cols;
    double value = 0.0;
    if (method == DocumentMethod::kCassim) {
      value = normalized_edit_similarity(queries[i], demos[j]);
    } else if (!cfg.normalize) {
      value = tree_kernel(queries[i], demos[j], cfg);
    } else {
      if (!(self_q[i] > 0.0) || !(self_d[j] > 0.0)) {
        throw Error(ErrorKind::kDegenerateTree, "self-kernel is zero (empty tree)");
      }
      value = std::clamp(tree_kernel(queries[i], demos[j], cfg) / std::sqrt(self_q[i] * self_d[j]), 0.0, 1.0);
    }
    out.values(i, j) = value;
  });
  return out;
}

}  // namespace termret
