// Rule-based grapheme-to-phoneme transliteration. A mapping table is an
// unordered set of grapheme-sequence -> phoneme-sequence rewrite rules;
// conversion is a single left-to-right greedy longest-match pass.
#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "phoner/corpus.hpp"
#include "phoner/unicode.hpp"
#include "phoner/utf8.hpp"

namespace phoner {

enum class CasePolicy { FoldToLower, Preserve };
enum class UnmappedPolicy { PassThrough, Drop };

inline CasePolicy parse_case_policy(std::string_view s) {
  if (s == "fold" || s == "fold-to-lower") return CasePolicy::FoldToLower;
  if (s == "preserve") return CasePolicy::Preserve;
  throw std::invalid_argument("unknown case policy '" + std::string(s) + "'");
}

inline UnmappedPolicy parse_unmapped_policy(std::string_view s) {
  if (s == "pass-through") return UnmappedPolicy::PassThrough;
  if (s == "drop") return UnmappedPolicy::Drop;
  throw std::invalid_argument("unknown unmapped policy '" + std::string(s) +
                              "'");
}

/// Ordered rewrite rules for one language. Matching is by longest
/// grapheme-sequence, so rule order never affects output. Under the
/// fold-to-lower policy rule graphemes are folded at load time and
/// input words are folded before matching.
class MappingTable {
 public:
  MappingTable(std::string lang, CasePolicy policy = CasePolicy::FoldToLower)
      : lang_(std::move(lang)), case_policy_(policy) {}

  /// Parses an Epitran-style table: one `grapheme,phoneme` rule per
  /// line, `#` comments and blank lines ignored, optional `Orth,Phon`
  /// header on the first data line.
  static MappingTable parse(std::string_view text, std::string lang,
                            CasePolicy policy = CasePolicy::FoldToLower) {
    MappingTable table(std::move(lang), policy);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool first_data_line = true;
    while (pos <= text.size()) {
      const std::size_t eol = text.find('\n', pos);
      std::string_view line = text.substr(
          pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
      pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty() || line[0] == '#') continue;
      if (first_data_line) {
        first_data_line = false;
        if (line == "Orth,Phon") continue;  // Epitran CSV header
      }
      const std::size_t comma = line.find(',');
      if (comma == std::string_view::npos ||
          line.find(',', comma + 1) != std::string_view::npos)
        throw std::runtime_error(
            "mapping line " + std::to_string(line_no) +
            ": expected 'grapheme-sequence,phoneme-sequence'");
      const std::string_view orth = line.substr(0, comma);
      const std::string_view phon = line.substr(comma + 1);
      if (orth.empty())
        throw std::runtime_error("mapping line " + std::to_string(line_no) +
                                 ": empty grapheme-sequence");
      if (phon.empty())
        throw std::runtime_error("mapping line " + std::to_string(line_no) +
                                 ": empty phoneme-sequence");
      try {
        table.add_rule(orth, phon);
      } catch (const std::exception& e) {
        throw std::runtime_error("mapping line " + std::to_string(line_no) +
                                 ": " + e.what());
      }
    }
    return table;
  }

  static MappingTable load(const std::string& path, std::string lang,
                           CasePolicy policy = CasePolicy::FoldToLower) {
    try {
      return parse(read_file(path), std::move(lang), policy);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": " + e.what());
    }
  }

  void add_rule(std::string_view graphemes, std::string_view phonemes) {
    if (graphemes.empty())
      throw std::invalid_argument("empty grapheme-sequence");
    std::u32string key = utf8_decode(graphemes);
    if (case_policy_ == CasePolicy::FoldToLower)
      for (char32_t& cp : key) cp = fold_lower(cp);
    auto [it, inserted] = rules_.emplace(key, std::string(phonemes));
    (void)it;
    if (!inserted)
      throw std::invalid_argument("duplicate grapheme-sequence '" +
                                  utf8_encode(key) + "'");
    if (key.size() > max_rule_cps_) max_rule_cps_ = key.size();
  }

  const std::string* find(const std::u32string& graphemes) const {
    auto it = rules_.find(graphemes);
    return it == rules_.end() ? nullptr : &it->second;
  }

  const std::string& lang() const { return lang_; }
  CasePolicy case_policy() const { return case_policy_; }
  std::size_t size() const { return rules_.size(); }
  std::size_t max_rule_length() const { return max_rule_cps_; }

 private:
  struct U32Hash {
    std::size_t operator()(const std::u32string& s) const {
      std::size_t h = 14695981039346656037ull;
      for (char32_t c : s) {
        h ^= static_cast<std::size_t>(c);
        h *= 1099511628211ull;
      }
      return h;
    }
  };

  std::string lang_;
  CasePolicy case_policy_;
  std::unordered_map<std::u32string, std::string, U32Hash> rules_;
  std::size_t max_rule_cps_ = 0;
};

struct UnmappedChar {
  std::size_t position = 0;  // codepoint index into the (folded) word
  std::string grapheme;
};

struct TransliterationResult {
  std::string ipa;
  std::vector<UnmappedChar> unmapped;
};

/// One greedy left-to-right pass: at each position the longest matching
/// grapheme-sequence is consumed and its phoneme-sequence emitted.
/// Characters matched by no rule are handled per `policy` and reported.
inline TransliterationResult transliterate_word(
    const MappingTable& table, std::string_view word,
    UnmappedPolicy policy = UnmappedPolicy::PassThrough) {
  if (detail::contains_whitespace(word))
    throw std::invalid_argument("transliterate_word: word contains whitespace");
  TransliterationResult result;
  std::u32string cps = utf8_decode(word);
  if (table.case_policy() == CasePolicy::FoldToLower)
    for (char32_t& cp : cps) cp = fold_lower(cp);

  std::size_t i = 0;
  std::u32string candidate;
  while (i < cps.size()) {
    const std::size_t max_len =
        std::min(table.max_rule_length(), cps.size() - i);
    const std::string* phonemes = nullptr;
    std::size_t matched = 0;
    for (std::size_t len = max_len; len >= 1; --len) {
      candidate.assign(cps, i, len);
      if ((phonemes = table.find(candidate))) {
        matched = len;
        break;
      }
    }
    if (phonemes) {
      result.ipa += *phonemes;
      i += matched;
    } else {
      result.unmapped.push_back({i, utf8_encode(cps[i])});
      if (policy == UnmappedPolicy::PassThrough)
        utf8_append(result.ipa, cps[i]);
      ++i;
    }
  }
  return result;
}

/// Per-corpus unmapped-character summary, keyed by grapheme.
struct G2pSummary {
  std::size_t tokens = 0;
  std::size_t unmapped_total = 0;
  std::map<std::string, std::size_t> unmapped_by_grapheme;
};

/// Transliterates every token of a corpus, leaving sentence structure
/// and tags untouched.
inline Corpus transliterate_corpus(const MappingTable& table,
                                   const Corpus& corpus, UnmappedPolicy policy,
                                   G2pSummary* summary = nullptr) {
  Corpus out;
  out.lang = corpus.lang;
  out.split = corpus.split;
  out.form = Form::Phoneme;
  out.sentences.reserve(corpus.sentences.size());
  for (const auto& sentence : corpus.sentences) {
    if (sentence.tokens.size() != sentence.tags.size())
      throw std::invalid_argument(
          "transliterate_corpus: sentence has token/tag length mismatch");
    WordLabeledSentence converted;
    converted.tags = sentence.tags;
    converted.tokens.reserve(sentence.tokens.size());
    for (const auto& token : sentence.tokens) {
      TransliterationResult r = transliterate_word(table, token, policy);
      if (summary) {
        ++summary->tokens;
        summary->unmapped_total += r.unmapped.size();
        for (const auto& u : r.unmapped)
          ++summary->unmapped_by_grapheme[u.grapheme];
      }
      converted.tokens.push_back(std::move(r.ipa));
    }
    out.sentences.push_back(std::move(converted));
  }
  return out;
}

}  // namespace phoner
