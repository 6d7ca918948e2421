#include "termret/corpus.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_set>

#include "termret/error.hpp"
#include "termret/lexical_sim.hpp"
#include "termret/util.hpp"

namespace termret {

using nlohmann::json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "train";
}

namespace {

Split parse_split(const std::string& s, std::size_t line_no) {
  if (s == "train") return Split::kTrain;
  if (s == "validation" || s == "val" || s == "dev") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw Error(ErrorKind::kMalformedLine, "line " + std::to_string(line_no) + ": unknown split '" + s + "'");
}

const json& require(const json& obj, const char* key, std::size_t line_no) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorKind::kMissingKey, "line " + std::to_string(line_no) + ": missing key '" + key + "'");
  }
  return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line_no) {
  const json& v = require(obj, key, line_no);
  if (!v.is_string()) {
    throw Error(ErrorKind::kMalformedLine, "line " + std::to_string(line_no) + ": '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

}  // namespace

Corpus parse_corpus(std::string_view contents) {
  Corpus corpus;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  for (auto line : split(contents, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kMalformedLine, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorKind::kMalformedLine, "line " + std::to_string(line_no) + ": expected a JSON object");
    }
    SentenceRecord rec;
    rec.id = require_string(obj, "id", line_no);
    rec.text = require_string(obj, "text", line_no);
    rec.domain = require_string(obj, "domain", line_no);
    const json& terms = require(obj, "terms", line_no);
    if (!terms.is_array()) {
      throw Error(ErrorKind::kMalformedLine, "line " + std::to_string(line_no) + ": 'terms' must be an array");
    }
    std::set<std::string> seen;
    for (const auto& t : terms) {
      if (!t.is_string()) {
        throw Error(ErrorKind::kMalformedLine, "line " + std::to_string(line_no) + ": terms must be strings");
      }
      std::string term = t.get<std::string>();
      if (term.empty()) {
        ++corpus.empty_terms_removed;
        continue;
      }
      if (!seen.insert(term).second) {
        ++corpus.duplicate_terms_removed;
        continue;
      }
      if (term.find(',') != std::string::npos) ++corpus.comma_terms;
      rec.terms.push_back(std::move(term));
    }
    if (auto it = obj.find("split"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) {
        throw Error(ErrorKind::kMalformedLine, "line " + std::to_string(line_no) + ": 'split' must be a string");
      }
      rec.split = parse_split(it->get<std::string>(), line_no);
    }
    if (!ids.insert(rec.id).second) {
      throw Error(ErrorKind::kDuplicateId, "line " + std::to_string(line_no) + ": id '" + rec.id + "' seen before");
    }
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

std::string serialize_corpus(std::span<const SentenceRecord> records) {
  std::string out;
  for (const auto& r : records) {
    json obj = {{"id", r.id}, {"text", r.text}, {"domain", r.domain}, {"terms", r.terms}};
    if (r.split) obj["split"] = std::string(to_string(*r.split));
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<std::string> check_term_containment(const SentenceRecord& record) {
  std::vector<std::string> warnings;
  for (const auto& term : record.terms) {
    if (record.text.find(term) == std::string::npos) {
      warnings.push_back(record.id + ": term '" + term + "' does not occur in the sentence text");
    }
  }
  return warnings;
}

std::vector<std::string> attach_trees(std::vector<SentenceRecord>& records, const Treebank& treebank) {
  std::vector<std::string> missing;
  for (auto& r : records) {
    const auto it = treebank.find(r.id);
    if (it == treebank.end()) {
      missing.push_back(r.id);
    } else {
      r.tree = it->second;
    }
  }
  return missing;
}

long CorpusStats::rounded_words() const { return std::lround(avg_words); }
long CorpusStats::rounded_terms() const { return std::lround(avg_terms); }

CorpusStats corpus_stats(std::span<const SentenceRecord> records) {
  if (records.empty()) throw Error(ErrorKind::kEmptyCorpus, "no sentences to summarize");
  CorpusStats stats;
  stats.n_sentences = records.size();
  for (const auto& r : records) {
    stats.total_words += tokenize(r.text).size();
    stats.total_terms += r.terms.size();
  }
  const double n = static_cast<double>(stats.n_sentences);
  stats.avg_words = static_cast<double>(stats.total_words) / n;
  stats.avg_terms = static_cast<double>(stats.total_terms) / n;
  return stats;
}

std::string stats_json(const CorpusStats& stats) {
  json obj = {{"n_sentences", stats.n_sentences},
              {"total_words", stats.total_words},
              {"total_terms", stats.total_terms},
              {"avg_words", stats.avg_words},
              {"avg_terms", stats.avg_terms},
              {"avg_words_rounded", stats.rounded_words()},
              {"avg_terms_rounded", stats.rounded_terms()}};
  return obj.dump(2);
}

std::string stats_table(std::span<const std::pair<std::string, CorpusStats>> rows) {
  std::size_t width = 6;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s  %9s\n", static_cast<int>(width), "Subset", "Sentences",
                "Avg Words", "Avg Terms");
  out += buf;
  for (const auto& [name, s] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %9zu  %9ld  %9ld\n", static_cast<int>(width), name.c_str(),
                  s.n_sentences, s.rounded_words(), s.rounded_terms());
    out += buf;
  }
  return out;
}

}  // namespace termret
