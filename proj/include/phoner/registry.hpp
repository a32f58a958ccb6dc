// Language registry: ISO 639-3 code, script, and which model family saw
// the language during pre-training. Drives the case partition and the
// Latin/non-Latin breakdown.
#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phoner {

enum class ScriptClass { Latin, NonLatin };

inline std::string_view to_string(ScriptClass c) {
  return c == ScriptClass::Latin ? "Latin" : "non-Latin";
}

struct LanguageProfile {
  std::string code;    // ISO 639-3
  std::string script;  // ISO 15924, e.g. Latn, Sinh, Arab
  bool seen_by_baseline = false;  // set B: grapheme-model pre-training
  bool seen_by_phoneme = false;   // set X: phoneme-model pre-training

  ScriptClass script_class() const {
    return script == "Latn" ? ScriptClass::Latin : ScriptClass::NonLatin;
  }
};

/// Registry file format: one language per line,
/// `code,script,seen_by_B,seen_by_X` with 0/1 flags; `#` comments and
/// blank lines are ignored. Order is preserved and used for all
/// deterministic per-language output.
class Registry {
 public:
  static Registry parse(std::string_view text) {
    Registry reg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t eol = text.find('\n', pos);
      std::string_view line = text.substr(
          pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
      pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty() || line[0] == '#') continue;

      std::vector<std::string> fields;
      std::size_t f = 0;
      while (true) {
        const std::size_t c = line.find(',', f);
        fields.emplace_back(line.substr(
            f, c == std::string_view::npos ? line.size() - f : c - f));
        if (c == std::string_view::npos) break;
        f = c + 1;
      }
      if (fields.size() != 4)
        throw std::runtime_error("registry line " + std::to_string(line_no) +
                                 ": expected 4 comma-separated fields");
      auto flag = [&](const std::string& s) {
        if (s == "0") return false;
        if (s == "1") return true;
        throw std::runtime_error("registry line " + std::to_string(line_no) +
                                 ": flag must be 0 or 1, got '" + s + "'");
      };
      reg.add({fields[0], fields[1], flag(fields[2]), flag(fields[3])});
    }
    return reg;
  }

  void add(LanguageProfile p) {
    if (index_.count(p.code))
      throw std::runtime_error("duplicate language code '" + p.code + "'");
    index_[p.code] = profiles_.size();
    profiles_.push_back(std::move(p));
  }

  const LanguageProfile* find(std::string_view code) const {
    auto it = index_.find(std::string(code));
    return it == index_.end() ? nullptr : &profiles_[it->second];
  }

  const LanguageProfile& at(std::string_view code) const {
    const LanguageProfile* p = find(code);
    if (!p)
      throw std::runtime_error("unknown language code '" + std::string(code) +
                               "'");
    return *p;
  }

  const std::vector<LanguageProfile>& profiles() const { return profiles_; }
  std::size_t size() const { return profiles_.size(); }

 private:
  std::vector<LanguageProfile> profiles_;
  std::map<std::string, std::size_t> index_;
};

/// The three evaluation-language sets: case 1 holds languages unseen by
/// every model, case 2 those seen only by the phoneme model, case 3
/// those seen only by the grapheme baselines. Languages seen by both
/// fall in no case.
struct CaseGrouping {
  std::set<std::string> case1, case2, case3;
};

inline CaseGrouping compute_cases(const Registry& registry) {
  CaseGrouping g;
  for (const auto& p : registry.profiles()) {
    if (!p.seen_by_baseline && !p.seen_by_phoneme) g.case1.insert(p.code);
    else if (!p.seen_by_baseline && p.seen_by_phoneme) g.case2.insert(p.code);
    else if (p.seen_by_baseline && !p.seen_by_phoneme) g.case3.insert(p.code);
  }
  return g;
}

/// ISO 639-1 alias for the bundled languages ("" when none exists).
/// WikiANN raw files prefix tokens with the two-letter code.
inline std::string_view iso1_alias(std::string_view iso3) {
  static const std::map<std::string_view, std::string_view> kAlias = {
      {"eng", "en"}, {"sin", "si"}, {"som", "so"}, {"mri", "mi"},
      {"quy", "qu"}, {"uig", "ug"}, {"kin", "rw"}, {"epo", "eo"},
      {"khm", "km"}, {"tuk", "tk"}, {"amh", "am"}, {"mlt", "mt"},
      {"ori", "or"}, {"san", "sa"}, {"ina", "ia"}, {"grn", "gn"},
      {"bel", "be"}, {"kur", "ku"}, {"snd", "sd"}, {"tgk", "tg"},
      {"yor", "yo"}, {"mar", "mr"}, {"jav", "jv"}, {"urd", "ur"},
      {"msa", "ms"}, {"hrv", "hr"}, {"mal", "ml"}, {"tel", "te"},
      {"uzb", "uz"}, {"pan", "pa"}, {"kir", "ky"}, {"kor", "ko"},
      {"spa", "es"},
  };
  auto it = kAlias.find(iso3);
  return it == kAlias.end() ? std::string_view{} : it->second;
}

/// True for codes the corpus reader recognizes as language prefixes:
/// the bundled ISO 639-3 codes and their 639-1 aliases.
inline bool is_known_lang_code(std::string_view code) {
  static const std::set<std::string_view> kCodes = [] {
    std::set<std::string_view> s = {"aii", "ilo", "ceb"};  // no 639-1 code
    static constexpr std::string_view iso3[] = {
        "eng", "sin", "som", "mri", "quy", "uig", "kin", "epo", "khm",
        "tuk", "amh", "mlt", "ori", "san", "ina", "grn", "bel", "kur",
        "snd", "tgk", "yor", "mar", "jav", "urd", "msa", "hrv", "mal",
        "tel", "uzb", "pan", "kir", "kor", "spa"};
    for (auto c : iso3) {
      s.insert(c);
      s.insert(iso1_alias(c));
    }
    return s;
  }();
  return kCodes.count(code) > 0;
}

}  // namespace phoner
