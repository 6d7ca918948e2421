#include "termret/treebank.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "termret/error.hpp"
#include "termret/util.hpp"

namespace termret {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool valid_label(std::string_view label) {
  if (label.empty()) return false;
  return std::none_of(label.begin(), label.end(),
                      [](char c) { return is_space(c) || c == '(' || c == ')'; });
}

// Recursive scratch form used while parsing and rewriting trees.
struct Scratch {
  std::string label;
  std::optional<std::string> token;
  std::vector<Scratch> kids;
};

void flatten(Scratch& s, std::vector<ParseTree::Node>& out) {
  const std::size_t id = out.size();
  out.push_back({std::move(s.label), {}, std::move(s.token)});
  for (auto& kid : s.kids) {
    out[id].children.push_back(out.size());
    flatten(kid, out);
  }
}

ParseTree from_scratch(Scratch root) {
  std::vector<ParseTree::Node> nodes;
  flatten(root, nodes);
  return ParseTree(std::move(nodes));
}

Scratch to_scratch(const ParseTree& tree, std::size_t id) {
  const auto& n = tree.node(id);
  Scratch s{n.label, n.token, {}};
  s.kids.reserve(n.children.size());
  for (auto c : n.children) s.kids.push_back(to_scratch(tree, c));
  return s;
}

class BracketParser {
 public:
  explicit BracketParser(std::string_view text) : text_(text) {}

  Scratch parse() {
    skip_space();
    if (pos_ >= text_.size()) throw Error(ErrorKind::kMalformedTree, "empty input");
    if (text_[pos_] != '(') {
      throw Error(ErrorKind::kMalformedTree, "expected '(' at position " + std::to_string(pos_));
    }
    Scratch root = parse_node(/*outermost=*/true);
    skip_space();
    if (pos_ < text_.size()) {
      if (text_[pos_] == ')') {
        throw Error(ErrorKind::kUnbalancedBrackets,
                    "unmatched ')' at position " + std::to_string(pos_));
      }
      throw Error(ErrorKind::kMalformedTree,
                  "trailing content at position " + std::to_string(pos_));
    }
    if (root.label == "ROOT" && root.kids.size() == 1 && !root.token) {
      Scratch inner = std::move(root.kids.front());
      return inner;
    }
    return root;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  std::string_view read_atom() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_]) && text_[pos_] != '(' && text_[pos_] != ')') {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  [[noreturn]] void unbalanced(std::size_t open_pos) const {
    throw Error(ErrorKind::kUnbalancedBrackets,
                "'(' at position " + std::to_string(open_pos) + " is never closed");
  }

  Scratch parse_node(bool outermost) {
    const std::size_t open_pos = pos_;
    ++pos_;  // '('
    skip_space();
    if (pos_ >= text_.size()) unbalanced(open_pos);

    Scratch node;
    if (text_[pos_] == ')') {
      throw Error(ErrorKind::kEmptyNode, "empty node at position " + std::to_string(open_pos));
    }
    const bool unlabeled = text_[pos_] == '(';
    if (!unlabeled) node.label = std::string(read_atom());

    std::vector<std::string_view> atoms;
    for (;;) {
      skip_space();
      if (pos_ >= text_.size()) unbalanced(open_pos);
      const char c = text_[pos_];
      if (c == ')') {
        ++pos_;
        break;
      }
      if (c == '(') {
        node.kids.push_back(parse_node(false));
      } else {
        atoms.push_back(read_atom());
      }
    }

    if (unlabeled) {
      if (outermost && node.kids.size() == 1 && atoms.empty()) return std::move(node.kids.front());
      throw Error(ErrorKind::kNodeWithoutLabel,
                  "node at position " + std::to_string(open_pos) + " has no label");
    }
    if (!atoms.empty()) {
      if (atoms.size() > 1 || !node.kids.empty()) {
        throw Error(ErrorKind::kMalformedTree,
                    "node '" + node.label + "' at position " + std::to_string(open_pos) +
                        " mixes words with constituents or holds several words");
      }
      node.token = std::string(atoms.front());
    }
    return node;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void serialize(const ParseTree& tree, std::size_t id, std::string& out) {
  const auto& n = tree.node(id);
  out.push_back('(');
  out += n.label;
  if (n.token) {
    out.push_back(' ');
    out += *n.token;
  }
  for (auto c : n.children) {
    out.push_back(' ');
    serialize(tree, c, out);
  }
  out.push_back(')');
}

std::string strip_functional_label(const std::string& label) {
  if (label.empty() || label.front() == '-') return label;
  const auto cut = label.find_first_of("-=");
  return cut == std::string::npos ? label : label.substr(0, cut);
}

// Returns false when the node should disappear from its parent.
bool rewrite(Scratch& s, const TreeOptions& options) {
  if (options.strip_functional) s.label = strip_functional_label(s.label);
  if (s.kids.empty()) {
    return !(options.drop_punctuation && is_punctuation_tag(s.label));
  }
  std::vector<Scratch> kept;
  kept.reserve(s.kids.size());
  for (auto& kid : s.kids) {
    if (rewrite(kid, options)) kept.push_back(std::move(kid));
  }
  s.kids = std::move(kept);
  return !s.kids.empty();
}

}  // namespace

ParseTree::ParseTree(std::vector<Node> preorder) : nodes_(std::move(preorder)) {
  // Children must be strictly increasing and each subtree must occupy the
  // contiguous range right after its root.
  std::vector<std::size_t> subtree_end(nodes_.size(), 0);
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const auto& n = nodes_[i];
    if (!valid_label(n.label)) {
      throw Error(ErrorKind::kMalformedTree, "invalid label '" + n.label + "'");
    }
    if (n.token && !n.children.empty()) {
      throw Error(ErrorKind::kMalformedTree, "internal node '" + n.label + "' carries a token");
    }
    std::size_t expect = i + 1;
    for (auto c : n.children) {
      if (c != expect || c >= nodes_.size()) {
        throw Error(ErrorKind::kMalformedTree, "node ids are not a preorder numbering");
      }
      expect = subtree_end[c];
    }
    subtree_end[i] = expect;
  }
  if (!nodes_.empty() && subtree_end[0] != nodes_.size()) {
    throw Error(ErrorKind::kMalformedTree, "nodes unreachable from the root");
  }
}

bool ParseTree::lexicalized() const {
  return std::any_of(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.token.has_value(); });
}

std::vector<std::size_t> ParseTree::postorder() const {
  std::vector<std::size_t> order;
  order.reserve(nodes_.size());
  if (nodes_.empty()) return order;
  // (node, next child index)
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto& [id, next] = stack.back();
    if (next < nodes_[id].children.size()) {
      const std::size_t child = nodes_[id].children[next++];
      stack.emplace_back(child, 0);
    } else {
      order.push_back(id);
      stack.pop_back();
    }
  }
  return order;
}

std::vector<std::string> ParseTree::tokens() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) {
    if (n.token) out.push_back(*n.token);
  }
  return out;
}

std::string ParseTree::to_string() const {
  std::string out;
  if (!nodes_.empty()) serialize(*this, 0, out);
  return out;
}

ParseTree parse_bracketed(std::string_view text) {
  return from_scratch(BracketParser(text).parse());
}

ParseTree unlexicalize(const ParseTree& tree) {
  std::vector<ParseTree::Node> nodes = tree.nodes();
  for (auto& n : nodes) n.token.reset();
  return ParseTree(std::move(nodes));
}

bool is_punctuation_tag(std::string_view tag) {
  static const std::set<std::string_view> kTags = {",", ".", ":", "``", "''", "-LRB-", "-RRB-",
                                                   "HYPH", "NFP", "(", ")"};
  return kTags.count(tag) > 0;
}

ParseTree normalize(const ParseTree& tree, const TreeOptions& options) {
  if (tree.empty() || (!options.strip_functional && !options.drop_punctuation)) return tree;
  Scratch root = to_scratch(tree, 0);
  if (!rewrite(root, options)) {
    throw Error(ErrorKind::kMalformedTree, "tree is empty after punctuation removal");
  }
  return from_scratch(std::move(root));
}

Treebank parse_treebank(std::string_view contents, const TreeOptions& options) {
  Treebank out;
  std::vector<std::string> problems;
  std::vector<std::string> duplicates;
  std::size_t line_no = 0;
  for (auto line : split(contents, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      problems.push_back("line " + std::to_string(line_no) + ": expected <id>\\t<tree>");
      continue;
    }
    std::string id(line.substr(0, tab));
    try {
      ParseTree tree = unlexicalize(normalize(parse_bracketed(line.substr(tab + 1)), options));
      if (!out.emplace(id, std::move(tree)).second) {
        duplicates.push_back("line " + std::to_string(line_no) + ": " + id);
      }
    } catch (const Error& e) {
      problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  auto join = [](const std::vector<std::string>& items) {
    std::string s;
    for (const auto& item : items) {
      if (!s.empty()) s += "; ";
      s += item;
    }
    return s;
  };
  if (!duplicates.empty()) throw Error(ErrorKind::kDuplicateId, join(duplicates));
  if (!problems.empty()) throw Error(ErrorKind::kTreebankParse, join(problems));
  return out;
}

Treebank load_treebank(const std::filesystem::path& path, const TreeOptions& options) {
  return parse_treebank(read_file(path), options);
}

std::string serialize_treebank(const Treebank& treebank) {
  std::string out;
  for (const auto& [id, tree] : treebank) {
    out += id;
    out.push_back('\t');
    out += tree.to_string();
    out.push_back('\n');
  }
  return out;
}

}  // namespace termret
