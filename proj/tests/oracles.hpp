#pragma once

// Independent reference implementations used to check the library. These are
// deliberately naive (exhaustive enumeration) and share no code with it.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "termret/corpus.hpp"
#include "termret/evaluation.hpp"
#include "termret/retrieval.hpp"
#include "termret/syntax_sim.hpp"
#include "termret/treebank.hpp"

namespace oracle {

std::string data_path(const std::string& name);

// Random ordered tree with 1..max_nodes nodes, labels drawn from `labels`.
termret::ParseTree random_tree(std::mt19937_64& rng, std::size_t max_nodes, const std::vector<std::string>& labels,
                               std::size_t min_nodes = 1);

// Sum over shared tree fragments of count_a * count_b * weight.
double fragment_kernel(const termret::ParseTree& a, const termret::ParseTree& b, double lambda,
                       termret::MatchMode mode);

// Minimum unit-cost edit distance over all valid (one-to-one, ancestor- and
// order-preserving) node mappings.
std::size_t brute_edit_distance(const termret::ParseTree& a, const termret::ParseTree& b);

// Minimum total cost over all injective assignments of the smaller side.
double brute_assignment_cost(const termret::Matrix& cost);

// Pearson correlation of mid-ranks.
double midrank_pearson(std::span<const double> xs, std::span<const double> ys);

// Exhaustive approximate-randomization test: every subset of sentences has
// its two systems swapped; two-sided on |delta F1|.
double sign_permutation_pvalue(std::span<const termret::MatchCounts> a, std::span<const termret::MatchCounts> b);

// The paired bootstrap p-value with the resampling distribution enumerated
// exactly (all multisets of sentence indices, multinomially weighted).
double exact_bootstrap_pvalue(std::span<const termret::MatchCounts> a, std::span<const termret::MatchCounts> b);

// Corpus F1 of a model that repeats the Terms line of the best retrieved
// demonstration, replayed from a retrieval dump.
double replay_top_demo_f1(std::span<const termret::RetrievalResult> retrieval,
                          std::span<const termret::SentenceRecord> demos,
                          std::span<const termret::SentenceRecord> queries);

}  // namespace oracle
