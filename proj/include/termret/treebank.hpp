#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace termret {

// Rooted ordered labeled tree for one sentence, stored flat in preorder so a
// node's id is its index. Immutable once built.
class ParseTree {
 public:
  struct Node {
    std::string label;
    std::vector<std::size_t> children;
    std::optional<std::string> token;  // surface word; preterminals only, before unlexicalization

    bool operator==(const Node&) const = default;
  };

  ParseTree() = default;
  // Takes nodes already in preorder; throws MalformedTree if the numbering or
  // labels violate the tree invariants.
  explicit ParseTree(std::vector<Node> preorder);

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::string& label(std::size_t id) const { return nodes_[id].label; }
  const std::vector<std::size_t>& children(std::size_t id) const { return nodes_[id].children; }
  bool is_leaf(std::size_t id) const { return nodes_[id].children.empty(); }

  bool lexicalized() const;
  // Node ids in postorder (children before parents).
  std::vector<std::size_t> postorder() const;
  // Surface tokens left to right (empty for unlexicalized trees).
  std::vector<std::string> tokens() const;

  // Canonical `(LABEL child ...)` form with single spaces.
  std::string to_string() const;

  bool operator==(const ParseTree&) const = default;

 private:
  std::vector<Node> nodes_;
};

struct TreeOptions {
  bool strip_functional = false;    // NP-SBJ-1 -> NP; labels starting with '-' kept
  bool drop_punctuation = false;    // remove punctuation preterminals (and emptied parents)
};

// Parses one PTB bracket expression. A `(ROOT x)` wrapper, or an unlabeled
// outermost `( x )` wrapper, around a single constituent is removed.
ParseTree parse_bracketed(std::string_view text);

// Same topology and labels, no surface tokens. Idempotent.
ParseTree unlexicalize(const ParseTree& tree);

// Applies the optional label and punctuation normalizations.
ParseTree normalize(const ParseTree& tree, const TreeOptions& options);

bool is_punctuation_tag(std::string_view tag);

using Treebank = std::map<std::string, ParseTree>;

// Reads `<id>\t<bracket string>` lines into unlexicalized trees. Blank lines
// are ignored. Parse errors from all lines are reported together.
Treebank load_treebank(const std::filesystem::path& path, const TreeOptions& options = {});
Treebank parse_treebank(std::string_view contents, const TreeOptions& options = {});

std::string serialize_treebank(const Treebank& treebank);

}  // namespace termret
