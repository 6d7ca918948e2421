#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "termret/corpus.hpp"
#include "termret/retrieval.hpp"

namespace termret {

inline constexpr std::string_view kDomainPlaceholder = "[DOMAIN_NAME]";
inline constexpr std::string_view kDemonstrationsPlaceholder = "[DEMONSTRATIONS]";

// Term-extraction instruction; the query line is appended by build_prompt.
std::string_view default_instruction_template();
// Query-side instruction for instruction-following embedders.
std::string_view embedding_instruction_template();

// Reads a template file (trailing whitespace dropped) and checks placeholders.
std::string load_template(const std::filesystem::path& path);

// Replaces every [DOMAIN_NAME] literally; [DEMONSTRATIONS] is kept as the
// split point. Throws MissingPlaceholder unless [DOMAIN_NAME] occurs at least
// once and [DEMONSTRATIONS] exactly once.
std::string render_instruction(std::string_view tmpl, std::string_view domain);

// "Given sentence from the <domain> domain: <text>\nTerms: <a, b | No term>".
// Terms containing commas are left out.
std::string render_demonstration(const SentenceRecord& demo);

std::string query_line(const SentenceRecord& query);

enum class DemoOrder {
  kAscending,   // most similar demonstration last, next to the query
  kDescending,  // most similar first
  kGiven,       // retrieval order untouched
};

DemoOrder parse_demo_order(std::string_view name);
std::string_view to_string(DemoOrder order);

// Reorders a best-first selection for rendering.
std::vector<ScoredDemo> order_demonstrations(std::span<const ScoredDemo> best_first, DemoOrder order);

struct PromptBundle {
  std::string query_id;
  std::string text;
  std::vector<std::string> demo_ids;  // in rendered order
  std::string domain;

  bool operator==(const PromptBundle&) const = default;
};

// instruction-with-demonstrations + blank line + query line.
PromptBundle build_prompt(std::string_view rendered_instruction, std::span<const SentenceRecord* const> demos,
                          const SentenceRecord& query);

struct ParsedResponse {
  std::vector<std::string> terms;  // first-occurrence order, no duplicates
  bool empty_output = false;       // the model returned nothing at all
};

// "No term" (any case, optionally quoted) means the empty set; otherwise the
// first non-empty line is split on commas, trimmed and deduplicated.
ParsedResponse parse_response(std::string_view raw);

}  // namespace termret
