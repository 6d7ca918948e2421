#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "termret/method.hpp"
#include "termret/treebank.hpp"

namespace termret {

enum class MatchMode {
  kProduction,  // equal label and equal ordered child-label sequence
  kLabel,       // equal label; children paired by position up to the shorter list
};

struct KernelConfig {
  double decay_lambda = 0.4;
  MatchMode match_mode = MatchMode::kLabel;
  bool normalize = true;

  // Throws ConfigError unless 0 < decay_lambda <= 1.
  void validate() const;
};

// Dense row-major matrix of reals.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }

  Matrix transposed() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Scores of queries (rows) against demonstrations (columns).
struct SimilarityMatrix {
  Matrix values;
  RetrievalMethod method = RetrievalMethod::kFastKassim;
};

// Subset-tree kernel: sum over node pairs of the shared-fragment count, each
// fragment weighted by decay_lambda^(expanded nodes). Trees must be
// unlexicalized.
double tree_kernel(const ParseTree& a, const ParseTree& b, const KernelConfig& cfg);

// K(a,b) / sqrt(K(a,a) K(b,b)) in [0, 1]. Throws DegenerateTree for empty trees.
double normalized_similarity(const ParseTree& a, const ParseTree& b, const KernelConfig& cfg);

// Ordered-tree edit distance with unit insert/delete/relabel costs
// (Zhang-Shasha keyroot dynamic program).
std::size_t tree_edit_distance(const ParseTree& a, const ParseTree& b);

// 1 - d(a,b) / max(|a|, |b|), clamped to [0, 1].
double normalized_edit_similarity(const ParseTree& a, const ParseTree& b);

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by row
  double total_cost = 0.0;
};

// Minimum-cost assignment of min(n, m) pairs. Among optimal assignments the
// lexicographically smallest pair list is returned.
Assignment hungarian_assignment(const Matrix& cost);

enum class DocumentMethod { kFastKassim, kCassim };

// Aligns sentences of two documents by maximum total similarity and returns
// the mean similarity of the aligned pairs.
double document_similarity(std::span<const ParseTree> doc_a, std::span<const ParseTree> doc_b,
                           DocumentMethod method, const KernelConfig& cfg = {});

// Fills query x demo similarities for fastkassim (kernel) or cassim (edit)
// scoring. Cells are computed independently on up to `parallelism` threads.
SimilarityMatrix syntactic_similarity_matrix(std::span<const ParseTree> queries,
                                             std::span<const ParseTree> demos,
                                             DocumentMethod method, const KernelConfig& cfg,
                                             std::size_t parallelism = 1);

}  // namespace termret
