// WikiANN-style corpus ingestion and serialization. One `token<TAB>tag`
// per line, blank line terminates a sentence; tokens may carry the raw
// WikiANN `lang:` prefix, which is stripped after a consistency check.
#pragma once

#include <array>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "phoner/registry.hpp"
#include "phoner/tags.hpp"

namespace phoner {

enum class Split { Train, Dev, Test };
enum class Form { Grapheme, Phoneme };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  throw std::logic_error("bad Split");
}

inline std::string_view to_string(Form f) {
  return f == Form::Grapheme ? "grapheme" : "phoneme";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "dev") return Split::Dev;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

inline Form parse_form(std::string_view s) {
  if (s == "grapheme") return Form::Grapheme;
  if (s == "phoneme") return Form::Phoneme;
  throw std::invalid_argument("unknown form '" + std::string(s) + "'");
}

struct Corpus {
  std::string lang;
  Split split = Split::Train;
  Form form = Form::Grapheme;
  std::vector<WordLabeledSentence> sentences;
};

namespace detail {

// Strips a leading `code:` language prefix when `code` is a recognized
// language code. A recognized code other than `lang` (or its 639-1
// alias) is an error; anything else (digits, unknown letter runs) is
// treated as part of the token.
inline std::string strip_lang_prefix(std::string_view token,
                                     std::string_view lang,
                                     std::size_t line_no) {
  const std::size_t colon = token.find(':');
  if (colon != std::string_view::npos && colon >= 1 && colon <= 3) {
    const std::string_view prefix = token.substr(0, colon);
    bool letters = true;
    for (char c : prefix)
      if (c < 'a' || c > 'z') letters = false;
    if (letters && is_known_lang_code(prefix)) {
      if (prefix != lang && prefix != iso1_alias(lang))
        throw std::runtime_error(
            "line " + std::to_string(line_no) + ": token prefix '" +
            std::string(prefix) + ":' does not match corpus language '" +
            std::string(lang) + "'");
      return std::string(token.substr(colon + 1));
    }
  }
  return std::string(token);
}

inline bool contains_whitespace(std::string_view s) {
  for (char c : s)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
        c == '\f')
      return true;
  return false;
}

}  // namespace detail

inline Corpus parse_corpus(std::string_view text, std::string lang,
                           Split split, Form form = Form::Grapheme) {
  Corpus corpus;
  corpus.lang = std::move(lang);
  corpus.split = split;
  corpus.form = form;

  WordLabeledSentence sentence;
  auto flush = [&] {
    if (!sentence.tokens.empty()) {
      corpus.sentences.push_back(std::move(sentence));
      sentence = {};
    }
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    const bool last = eol == std::string_view::npos;
    pos = last ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      flush();
      if (last) break;
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos ||
        line.find('\t', tab + 1) != std::string_view::npos)
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": expected exactly 2 tab-separated fields");
    std::string token = detail::strip_lang_prefix(line.substr(0, tab),
                                                  corpus.lang, line_no);
    const std::string_view tag_text = line.substr(tab + 1);
    if (token.empty())
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": empty token");
    if (detail::contains_whitespace(token))
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": token contains whitespace");
    Tag tag;
    try {
      tag = Tag::parse(tag_text);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " +
                               e.what());
    }
    sentence.tokens.push_back(std::move(token));
    sentence.tags.push_back(tag);
  }
  flush();
  return corpus;
}

/// Serializes a corpus so that parse_corpus(write_corpus(c)) == c.
/// Language prefixes are never written.
inline std::string write_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus.sentences) {
    if (s.tokens.size() != s.tags.size())
      throw std::runtime_error("corpus sentence has token/tag length mismatch");
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (detail::contains_whitespace(s.tokens[i]))
        throw std::runtime_error("token '" + s.tokens[i] +
                                 "' contains whitespace; cannot serialize");
      out += s.tokens[i];
      out += '\t';
      out += s.tags[i].str();
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

struct CorpusStats {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::array<std::size_t, 3> entities{};  // indexed by EntityType

  std::size_t entity_total() const {
    return entities[0] + entities[1] + entities[2];
  }
};

inline CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  st.sentences = corpus.sentences.size();
  for (const auto& s : corpus.sentences) {
    st.tokens += s.tokens.size();
    for (const Tag& t : s.tags)
      if (t.kind == Tag::Kind::B)
        ++st.entities[static_cast<std::size_t>(t.type)];
  }
  return st;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline Corpus load_corpus_file(const std::string& path, std::string lang,
                               Split split, Form form = Form::Grapheme) {
  try {
    return parse_corpus(read_file(path), std::move(lang), split, form);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace phoner
