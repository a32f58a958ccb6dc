// Span-level precision/recall/F1 and the report shapes used for the
// cross-lingual comparison: per-language scores, case-group aggregates
// (mean and sample standard deviation) and the Latin/non-Latin split.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "phoner/registry.hpp"
#include "phoner/tags.hpp"

namespace phoner {

struct ScoreTriple {
  double precision = 0.0;  // percentages in [0, 100]
  double recall = 0.0;
  double f1 = 0.0;
};

struct SpanCounts {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  ScoreTriple score() const {
    ScoreTriple s;
    if (predicted > 0)
      s.precision = 100.0 * static_cast<double>(correct) /
                    static_cast<double>(predicted);
    if (gold > 0)
      s.recall = 100.0 * static_cast<double>(correct) /
                 static_cast<double>(gold);
    if (s.precision + s.recall > 0)
      s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
    return s;
  }
};

/// Micro-averaged span counts over parallel gold/predicted tag
/// sequences. A predicted span is correct iff the gold sentence has a
/// span with identical (start, end, type).
inline SpanCounts count_span_matches(
    std::span<const std::vector<Tag>> gold,
    std::span<const std::vector<Tag>> pred, SpanMode mode) {
  if (gold.size() != pred.size())
    throw std::invalid_argument("span_f1: gold/pred sentence count mismatch");
  SpanCounts counts;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size())
      throw std::invalid_argument("span_f1: sentence " + std::to_string(i) +
                                  " has gold/pred length mismatch");
    const auto g = extract_spans(gold[i], mode);
    const auto p = extract_spans(pred[i], mode);
    counts.gold += g.size();
    counts.predicted += p.size();
    // both lists are sorted by start and non-overlapping
    std::size_t a = 0, b = 0;
    while (a < g.size() && b < p.size()) {
      if (g[a] == p[b]) {
        ++counts.correct;
        ++a;
        ++b;
      } else if (g[a] < p[b]) {
        ++a;
      } else {
        ++b;
      }
    }
  }
  return counts;
}

inline ScoreTriple span_f1(std::span<const std::vector<Tag>> gold,
                           std::span<const std::vector<Tag>> pred,
                           SpanMode mode) {
  return count_span_matches(gold, pred, mode).score();
}

struct AggregateStat {
  double avg = 0.0;
  double stdev = 0.0;  // sample standard deviation, divisor n-1
};

/// Mean and sample standard deviation of per-language F1 scores, the
/// AVG/STD convention of the result tables.
inline AggregateStat aggregate(const std::map<std::string, double>& f1_by_language) {
  if (f1_by_language.size() < 2)
    throw std::invalid_argument("aggregate: need at least 2 languages");
  AggregateStat st;
  for (const auto& kv : f1_by_language) st.avg += kv.second;
  st.avg /= static_cast<double>(f1_by_language.size());
  double ss = 0.0;
  for (const auto& kv : f1_by_language)
    ss += (kv.second - st.avg) * (kv.second - st.avg);
  st.stdev = std::sqrt(ss / static_cast<double>(f1_by_language.size() - 1));
  return st;
}

struct GroupStat {
  double avg = 0.0;
  std::optional<double> stdev;  // absent for singleton groups
  std::size_t n = 0;
};

struct EvalReport {
  // metadata: how the scores were produced
  std::string scoring_mode;  // "strict" | "lenient"
  std::string unit_level;    // "word" | "segment" | "character"
  std::string averaging = "micro";

  std::vector<std::pair<std::string, ScoreTriple>> per_language;  // registry order
  std::vector<std::pair<std::string, GroupStat>> groups;          // fixed order
  std::map<ScriptClass, std::vector<double>> script_breakdown;    // f1 lists
};

namespace detail {

inline GroupStat group_stat(const std::vector<double>& f1s) {
  GroupStat g;
  g.n = f1s.size();
  for (double v : f1s) g.avg += v;
  g.avg /= static_cast<double>(f1s.size());
  if (f1s.size() >= 2) {
    double ss = 0.0;
    for (double v : f1s) ss += (v - g.avg) * (v - g.avg);
    g.stdev = std::sqrt(ss / static_cast<double>(f1s.size() - 1));
  }
  return g;
}

}  // namespace detail

/// Assembles the per-language scores into the report: case groups and
/// script classes, aggregated over the languages actually scored,
/// everything in registry order.
inline EvalReport build_report(const std::map<std::string, ScoreTriple>& scores,
                               const CaseGrouping& cases,
                               const Registry& registry,
                               std::string scoring_mode = "lenient",
                               std::string unit_level = "segment") {
  for (const auto& kv : scores)
    registry.at(kv.first);  // unknown language code is an error

  EvalReport report;
  report.scoring_mode = std::move(scoring_mode);
  report.unit_level = std::move(unit_level);

  std::vector<double> case_f1[3];
  std::vector<double> latin_f1, non_latin_f1;
  for (const auto& profile : registry.profiles()) {
    auto it = scores.find(profile.code);
    if (it == scores.end()) continue;
    report.per_language.emplace_back(profile.code, it->second);
    const double f1 = it->second.f1;
    if (cases.case1.count(profile.code)) case_f1[0].push_back(f1);
    else if (cases.case2.count(profile.code)) case_f1[1].push_back(f1);
    else if (cases.case3.count(profile.code)) case_f1[2].push_back(f1);
    (profile.script_class() == ScriptClass::Latin ? latin_f1 : non_latin_f1)
        .push_back(f1);
  }

  const char* case_names[3] = {"case1", "case2", "case3"};
  for (int c = 0; c < 3; ++c)
    if (!case_f1[c].empty())
      report.groups.emplace_back(case_names[c], detail::group_stat(case_f1[c]));
  if (!latin_f1.empty()) {
    report.groups.emplace_back("script-latin", detail::group_stat(latin_f1));
    report.script_breakdown[ScriptClass::Latin] = latin_f1;
  }
  if (!non_latin_f1.empty()) {
    report.groups.emplace_back("script-non-latin",
                               detail::group_stat(non_latin_f1));
    report.script_breakdown[ScriptClass::NonLatin] = non_latin_f1;
  }
  return report;
}

namespace detail {

inline std::string fmt2(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string fmt4(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace detail

/// Human-readable tab-separated report: per-language block followed by
/// group aggregates, values rounded to 2 decimals.
inline std::string write_report_tsv(const EvalReport& report) {
  std::string out;
  out += "# phoner evaluation report\n";
  out += "# mode=" + report.scoring_mode + "\tunit=" + report.unit_level +
         "\taverage=" + report.averaging + "\n";
  out += "lang\tP\tR\tF1\n";
  for (const auto& [code, s] : report.per_language)
    out += code + "\t" + detail::fmt2(s.precision) + "\t" +
           detail::fmt2(s.recall) + "\t" + detail::fmt2(s.f1) + "\n";
  out += "group\tAVG\tSTD\tN\n";
  for (const auto& [name, g] : report.groups)
    out += name + "\t" + detail::fmt2(g.avg) + "\t" +
           (g.stdev ? detail::fmt2(*g.stdev) : std::string("-")) + "\t" +
           std::to_string(g.n) + "\n";
  return out;
}

/// Machine-readable dump for plotting scripts, one key=value per line.
inline std::string write_report_kv(const EvalReport& report) {
  std::string out;
  out += "meta.mode=" + report.scoring_mode + "\n";
  out += "meta.unit=" + report.unit_level + "\n";
  out += "meta.average=" + report.averaging + "\n";
  for (const auto& [code, s] : report.per_language) {
    out += "lang." + code + ".precision=" + detail::fmt4(s.precision) + "\n";
    out += "lang." + code + ".recall=" + detail::fmt4(s.recall) + "\n";
    out += "lang." + code + ".f1=" + detail::fmt4(s.f1) + "\n";
  }
  for (const auto& [name, g] : report.groups) {
    out += "group." + name + ".avg=" + detail::fmt4(g.avg) + "\n";
    if (g.stdev) out += "group." + name + ".std=" + detail::fmt4(*g.stdev) + "\n";
    out += "group." + name + ".n=" + std::to_string(g.n) + "\n";
  }
  for (const auto& [cls, f1s] : report.script_breakdown) {
    out += std::string("script.") +
           (cls == ScriptClass::Latin ? "latin" : "non-latin") + ".f1=";
    for (std::size_t i = 0; i < f1s.size(); ++i)
      out += (i ? "," : "") + detail::fmt4(f1s[i]);
    out += "\n";
  }
  return out;
}

/// Per-language score files: `lang<TAB>P<TAB>R<TAB>F1` or `lang<TAB>F1`
/// per line, `-` for unknown precision/recall, `#` comments ignored.
inline std::map<std::string, ScoreTriple> parse_scores(std::string_view text) {
  std::map<std::string, ScoreTriple> scores;
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
      const std::size_t t = line.find('\t', f);
      fields.emplace_back(line.substr(
          f, t == std::string_view::npos ? line.size() - f : t - f));
      if (t == std::string_view::npos) break;
      f = t + 1;
    }
    auto value = [&](const std::string& s) -> double {
      if (s == "-") return std::nan("");
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      } catch (const std::exception&) {
        throw std::runtime_error("scores line " + std::to_string(line_no) +
                                 ": bad number '" + s + "'");
      }
    };
    ScoreTriple triple;
    if (fields.size() == 2) {
      triple.precision = std::nan("");
      triple.recall = std::nan("");
      triple.f1 = value(fields[1]);
    } else if (fields.size() == 4) {
      triple.precision = value(fields[1]);
      triple.recall = value(fields[2]);
      triple.f1 = value(fields[3]);
    } else {
      throw std::runtime_error("scores line " + std::to_string(line_no) +
                               ": expected 2 or 4 tab-separated fields");
    }
    if (fields[0].empty() || scores.count(fields[0]))
      throw std::runtime_error("scores line " + std::to_string(line_no) +
                               ": missing or duplicate language code");
    scores[fields[0]] = triple;
  }
  return scores;
}

inline std::string write_scores(
    const std::map<std::string, ScoreTriple>& scores) {
  std::string out;
  for (const auto& [code, s] : scores)
    out += code + "\t" + detail::fmt4(s.precision) + "\t" +
           detail::fmt4(s.recall) + "\t" + detail::fmt4(s.f1) + "\n";
  return out;
}

}  // namespace phoner
