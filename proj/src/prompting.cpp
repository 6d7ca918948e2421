#include "termret/prompting.hpp"

#include <algorithm>
#include <set>

#include "termret/error.hpp"
#include "termret/util.hpp"

namespace termret {
namespace {

constexpr std::string_view kDefaultTemplate =
    "From the given sentence, extract terms and named entities relevant to the [DOMAIN_NAME] domain. "
    "If no relevant terms or named entities are found, return \xE2\x80\x9CNo term\xE2\x80\x9D.\n"
    "\n"
    "# Guidelines:\n"
    "1. Extract only the terms and named entities present in the sentence.\n"
    "2. Focus solely on English terms.\n"
    "3. Provide only the extracted terms and named entities or \xE2\x80\x9CNo term,\xE2\x80\x9D without "
    "additional commentary.\n"
    "4. Use commas to separate each term and named entity.\n"
    "5. Maintain the original case (e.g., lowercase, capitalized) of each term.\n"
    "\n"
    "[DEMONSTRATIONS]";

constexpr std::string_view kEmbeddingTemplate =
    "Given a sentence and a specific domain, retrieve sentences from other domains that follow a similar "
    "structure while using domain-specific terminology. These examples should help language models identify "
    "and extract key terms related to the original domain from the given sentence.\n"
    "\n"
    "Domain: [DOMAIN_NAME] Sentence:";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

void check_placeholders(std::string_view tmpl) {
  if (count_occurrences(tmpl, kDomainPlaceholder) == 0) {
    throw Error(ErrorKind::kMissingPlaceholder, "template lacks [DOMAIN_NAME]");
  }
  const auto demos = count_occurrences(tmpl, kDemonstrationsPlaceholder);
  if (demos != 1) {
    throw Error(ErrorKind::kMissingPlaceholder,
                "template must contain [DEMONSTRATIONS] exactly once, found " + std::to_string(demos));
  }
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string_view strip_quotes(std::string_view s) {
  static constexpr std::string_view kOpen[] = {"\"", "'", "\xE2\x80\x9C", "\xE2\x80\x98"};
  static constexpr std::string_view kClose[] = {"\"", "'", "\xE2\x80\x9D", "\xE2\x80\x99"};
  for (std::size_t i = 0; i < 4; ++i) {
    if (s.size() >= kOpen[i].size() + kClose[i].size() && s.starts_with(kOpen[i]) && s.ends_with(kClose[i])) {
      return trim(s.substr(kOpen[i].size(), s.size() - kOpen[i].size() - kClose[i].size()));
    }
  }
  return s;
}

bool means_no_term(std::string_view s) {
  s = trim(s);
  if (s.ends_with('.')) s = trim(s.substr(0, s.size() - 1));
  s = strip_quotes(s);
  if (s.ends_with('.')) s.remove_suffix(1);
  return ascii_lower(trim(s)) == "no term";
}

}  // namespace

std::string_view default_instruction_template() { return kDefaultTemplate; }
std::string_view embedding_instruction_template() { return kEmbeddingTemplate; }

std::string load_template(const std::filesystem::path& path) {
  std::string text = read_file(path);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ')) text.pop_back();
  check_placeholders(text);
  return text;
}

std::string render_instruction(std::string_view tmpl, std::string_view domain) {
  check_placeholders(tmpl);
  return replace_all(tmpl, kDomainPlaceholder, domain_display_name(domain));
}

std::string render_demonstration(const SentenceRecord& demo) {
  std::string terms;
  for (const auto& t : demo.terms) {
    if (t.find(',') != std::string::npos) continue;
    if (!terms.empty()) terms += ", ";
    terms += t;
  }
  if (terms.empty()) terms = "No term";
  return "Given sentence from the " + domain_display_name(demo.domain) + " domain: " + demo.text + "\nTerms: " + terms;
}

std::string query_line(const SentenceRecord& query) {
  return "Given sentence from the " + domain_display_name(query.domain) + " domain: " + query.text;
}

DemoOrder parse_demo_order(std::string_view name) {
  if (name == "asc") return DemoOrder::kAscending;
  if (name == "desc") return DemoOrder::kDescending;
  if (name == "given") return DemoOrder::kGiven;
  throw Error(ErrorKind::kConfig, "demo order must be asc, desc or given, got '" + std::string(name) + "'");
}

std::string_view to_string(DemoOrder order) {
  switch (order) {
    case DemoOrder::kAscending: return "asc";
    case DemoOrder::kDescending: return "desc";
    case DemoOrder::kGiven: return "given";
  }
  return "asc";
}

std::vector<ScoredDemo> order_demonstrations(std::span<const ScoredDemo> best_first, DemoOrder order) {
  std::vector<ScoredDemo> out(best_first.begin(), best_first.end());
  if (order == DemoOrder::kAscending) std::reverse(out.begin(), out.end());
  return out;
}

PromptBundle build_prompt(std::string_view rendered_instruction, std::span<const SentenceRecord* const> demos,
                          const SentenceRecord& query) {
  const auto split_at = rendered_instruction.find(kDemonstrationsPlaceholder);
  if (split_at == std::string_view::npos) {
    throw Error(ErrorKind::kMissingPlaceholder, "instruction has no [DEMONSTRATIONS] split point");
  }
  PromptBundle bundle;
  bundle.query_id = query.id;
  bundle.domain = query.domain;
  std::string block;
  for (const SentenceRecord* demo : demos) {
    if (!block.empty()) block += "\n\n";
    block += render_demonstration(*demo);
    bundle.demo_ids.push_back(demo->id);
  }
  bundle.text.reserve(rendered_instruction.size() + block.size() + query.text.size() + 64);
  bundle.text.append(rendered_instruction.substr(0, split_at));
  bundle.text.append(block);
  bundle.text.append(rendered_instruction.substr(split_at + kDemonstrationsPlaceholder.size()));
  bundle.text.append("\n\n");
  bundle.text.append(query_line(query));
  return bundle;
}

ParsedResponse parse_response(std::string_view raw) {
  ParsedResponse out;
  if (trim(raw).empty()) {
    out.empty_output = true;
    return out;
  }
  if (means_no_term(raw)) return out;
  std::string_view first;
  for (auto line : split(raw, '\n')) {
    if (!trim(line).empty()) {
      first = line;
      break;
    }
  }
  if (means_no_term(first)) return out;
  std::set<std::string_view> seen;
  for (auto piece : split(first, ',')) {
    const auto term = trim(piece);
    if (term.empty() || !seen.insert(term).second) continue;
    out.terms.emplace_back(term);
  }
  return out;
}

}  // namespace termret
