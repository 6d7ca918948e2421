#include "termret/lexical_sim.hpp"

#include <cctype>
#include <cmath>
#include <set>

#include "termret/error.hpp"
#include "termret/util.hpp"

namespace termret {
namespace {

// Decodes one UTF-8 code point at s[i]; returns its byte length (1 for bytes
// that do not start a valid sequence).
std::size_t utf8_length(std::string_view s, std::size_t i, char32_t& cp) {
  const auto c = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  if (c < 0x80) {
    cp = c;
    return 1;
  } else if ((c >> 5) == 0x6) {
    cp = c & 0x1F;
    len = 2;
  } else if ((c >> 4) == 0xE) {
    cp = c & 0x0F;
    len = 3;
  } else if ((c >> 3) == 0x1E) {
    cp = c & 0x07;
    len = 4;
  } else {
    cp = c;
    return 1;
  }
  if (i + len > s.size()) {
    cp = c;
    return 1;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const auto cc = static_cast<unsigned char>(s[i + k]);
    if ((cc >> 6) != 0x2) {
      cp = c;
      return 1;
    }
    cp = (cp << 6) | (cc & 0x3F);
  }
  return len;
}

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_punct(char32_t cp) {
  if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
  // General punctuation block, Latin-1 punctuation and common quotes/dashes.
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         cp == 0xA1 || cp == 0xAB || cp == 0xBB || cp == 0xBF || cp == 0xB7 ||
         (cp >= 0x3001 && cp <= 0x3003);
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return out;
}

struct CodePoint {
  std::size_t begin;
  std::size_t length;
  char32_t value;
};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::vector<CodePoint> current;
  auto flush = [&] {
    if (current.empty()) return;
    std::size_t lo = 0;
    std::size_t hi = current.size();
    while (lo < hi && is_punct(current[lo].value)) ++lo;
    while (hi > lo && is_punct(current[hi - 1].value)) --hi;
    if (lo < hi) {
      const std::size_t b = current[lo].begin;
      const std::size_t e = current[hi - 1].begin + current[hi - 1].length;
      tokens.push_back(lower_ascii(text.substr(b, e - b)));
    }
    current.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    char32_t cp = 0;
    const std::size_t len = utf8_length(text, i, cp);
    if (is_unicode_space(cp)) {
      flush();
    } else {
      current.push_back({i, len, cp});
    }
    i += len;
  }
  flush();
  return tokens;
}

Bm25Index Bm25Index::build(std::span<const std::vector<std::string>> corpus, Bm25Params params) {
  if (corpus.empty()) throw Error(ErrorKind::kEmptyCorpus, "cannot index an empty corpus");
  if (!(params.k1 >= 0.0) || !(params.b >= 0.0 && params.b <= 1.0)) {
    throw Error(ErrorKind::kConfig, "bm25 requires k1 >= 0 and b in [0, 1]");
  }
  Bm25Index index;
  index.params_ = params;
  index.doc_term_freqs_.reserve(corpus.size());
  std::size_t total = 0;
  for (const auto& doc : corpus) {
    std::map<std::string, std::size_t> tf;
    for (const auto& term : doc) ++tf[term];
    for (const auto& [term, count] : tf) ++index.doc_freq_[term];
    index.doc_lengths_.push_back(doc.size());
    total += doc.size();
    index.doc_term_freqs_.push_back(std::move(tf));
  }
  index.avg_doc_length_ = static_cast<double>(total) / static_cast<double>(corpus.size());
  return index;
}

std::size_t Bm25Index::doc_freq(const std::string& term) const {
  const auto it = doc_freq_.find(term);
  return it == doc_freq_.end() ? 0 : it->second;
}

std::size_t Bm25Index::term_freq(std::size_t doc, const std::string& term) const {
  if (doc >= num_docs()) throw Error(ErrorKind::kDocOutOfRange, "document " + std::to_string(doc) + " out of range");
  const auto& tf = doc_term_freqs_[doc];
  const auto it = tf.find(term);
  return it == tf.end() ? 0 : it->second;
}

double Bm25Index::idf(const std::string& term) const {
  const double n = static_cast<double>(num_docs());
  const double df = static_cast<double>(doc_freq(term));
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double Bm25Index::score(std::span<const std::string> query, std::size_t doc) const {
  if (doc >= num_docs()) throw Error(ErrorKind::kDocOutOfRange, "document " + std::to_string(doc) + " out of range");
  const double k1 = params_.k1;
  const double b = params_.b;
  const double dl = static_cast<double>(doc_lengths_[doc]);
  const double norm = avg_doc_length_ > 0.0 ? dl / avg_doc_length_ : 0.0;
  std::set<std::string_view> seen;
  double total = 0.0;
  for (const auto& term : query) {
    if (params_.dedupe_query_terms && !seen.insert(term).second) continue;
    const auto& tf_map = doc_term_freqs_[doc];
    const auto it = tf_map.find(term);
    if (it == tf_map.end()) continue;
    const double tf = static_cast<double>(it->second);
    total += idf(term) * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
  }
  return total;
}

std::vector<double> Bm25Index::score_all(std::span<const std::string> query) const {
  std::vector<double> out(num_docs());
  for (std::size_t d = 0; d < num_docs(); ++d) out[d] = score(query, d);
  return out;
}

std::string Bm25Index::serialize() const {
  std::string out;
  out += "k1=" + format_real(params_.k1) + " b=" + format_real(params_.b) +
         " dedupe=" + (params_.dedupe_query_terms ? "1" : "0") + "\n";
  out += "docs=" + std::to_string(num_docs()) + " avgdl=" + format_real(avg_doc_length_) + "\n";
  for (const auto& [term, df] : doc_freq_) out += "df\t" + term + "\t" + std::to_string(df) + "\n";
  for (std::size_t d = 0; d < num_docs(); ++d) {
    out += "doc\t" + std::to_string(d) + "\t" + std::to_string(doc_lengths_[d]);
    for (const auto& [term, tf] : doc_term_freqs_[d]) out += "\t" + term + ":" + std::to_string(tf);
    out += "\n";
  }
  return out;
}

}  // namespace termret
