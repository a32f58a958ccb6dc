// Experiment configuration: a flat text file of dotted keys. Unknown
// and duplicate keys are hard errors so sweep typos surface immediately.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "phoner/corpus.hpp"
#include "phoner/crf.hpp"
#include "phoner/g2p.hpp"
#include "phoner/segment.hpp"
#include "phoner/tags.hpp"
#include "phoner/utf8.hpp"

namespace phoner {

inline SpanMode parse_span_mode(std::string_view s) {
  if (s == "strict") return SpanMode::Strict;
  if (s == "lenient") return SpanMode::Lenient;
  throw std::invalid_argument("unknown scoring mode '" + std::string(s) + "'");
}

inline std::string_view to_string(SpanMode m) {
  return m == SpanMode::Strict ? "strict" : "lenient";
}

struct ExperimentConfig {
  std::string train_lang = "eng";
  std::vector<std::string> eval_langs;
  Form input_form = Form::Phoneme;
  std::map<std::string, std::string> mapping_tables;  // lang -> path
  CasePolicy case_policy = CasePolicy::FoldToLower;
  UnmappedPolicy unmapped_policy = UnmappedPolicy::PassThrough;
  SegmenterConfig segmenter;
  FeatureTemplate features;
  TrainingConfig training;
  SpanMode scoring_mode = SpanMode::Lenient;
  std::string data_dir = "data/fixtures";
  std::string registry_path = "data/registry.csv";
  std::string out_dir = "out";

  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::string& path) {
    try {
      return parse(read_file(path));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": " + e.what());
    }
  }

  /// Every invariant that can be checked without touching the
  /// filesystem. Mapping tables are required for the training language
  /// and every evaluation language when the input form is phoneme.
  void validate() const {
    if (eval_langs.empty())
      throw std::runtime_error("config: eval.langs must be non-empty");
    std::set<std::string> uniq(eval_langs.begin(), eval_langs.end());
    if (uniq.size() != eval_langs.size())
      throw std::runtime_error("config: duplicate language in eval.langs");
    if (input_form == Form::Phoneme) {
      std::vector<std::string> langs = eval_langs;
      langs.push_back(train_lang);
      for (const auto& lang : langs)
        if (!mapping_tables.count(lang))
          throw std::runtime_error(
              "config: input.form=phoneme requires map." + lang);
    }
    training.validate();
    if (features.window < 0)
      throw std::runtime_error("config: features.window must be >= 0");
  }

  /// Canonical dump of the effective configuration, written into the
  /// output directory so runs are self-describing and diffable.
  std::string echo() const;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  return s;
}

inline bool parse_bool(std::string_view v, std::size_t line_no) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::runtime_error("config line " + std::to_string(line_no) +
                           ": expected true/false, got '" + std::string(v) +
                           "'");
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::string_view stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;

    const std::size_t eq = stripped.find('=');
    if (eq == std::string_view::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected 'key = value'");
    const std::string key(detail::trim(stripped.substr(0, eq)));
    const std::string value(detail::trim(stripped.substr(eq + 1)));
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": empty key");
    if (!seen.insert(key).second)
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": duplicate key '" + key + "'");

    auto as_int = [&](long lo, long hi) -> long {
      try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size() || v < lo || v > hi)
          throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": bad integer '" + value + "'");
      }
    };
    auto as_double = [&]() -> double {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": bad number '" + value + "'");
      }
    };

    try {
      if (key == "train.lang") cfg.train_lang = value;
      else if (key == "eval.langs") {
        cfg.eval_langs.clear();
        std::size_t f = 0;
        while (f <= value.size()) {
          const std::size_t c = value.find(',', f);
          const std::string_view item = detail::trim(value.substr(
              f, c == std::string_view::npos ? value.size() - f : c - f));
          if (!item.empty()) cfg.eval_langs.emplace_back(item);
          if (c == std::string_view::npos) break;
          f = c + 1;
        }
      } else if (key == "input.form") cfg.input_form = parse_form(value);
      else if (key.rfind("map.", 0) == 0) {
        const std::string lang = key.substr(4);
        if (lang.empty())
          throw std::runtime_error("config line " + std::to_string(line_no) +
                                   ": map. key needs a language code");
        cfg.mapping_tables[lang] = value;
      } else if (key == "g2p.case") cfg.case_policy = parse_case_policy(value);
      else if (key == "g2p.unmapped")
        cfg.unmapped_policy = parse_unmapped_policy(value);
      else if (key == "segment.attach_modifiers") {
        cfg.segmenter.attach_modifiers.clear();
        for (char32_t cp : utf8_decode(value))
          cfg.segmenter.attach_modifiers.insert(cp);
      } else if (key == "segment.join_tie_bar")
        cfg.segmenter.join_tie_bar = detail::parse_bool(value, line_no);
      else if (key == "features.window")
        cfg.features.window = static_cast<int>(as_int(0, 16));
      else if (key == "features.identity")
        cfg.features.use_unit_identity = detail::parse_bool(value, line_no);
      else if (key == "features.affixes")
        cfg.features.use_affixes = detail::parse_bool(value, line_no);
      else if (key == "features.bigrams")
        cfg.features.use_bigrams = detail::parse_bool(value, line_no);
      else if (key == "train.epochs")
        cfg.training.epochs = static_cast<int>(as_int(0, 1000000));
      else if (key == "train.learning_rate") cfg.training.learning_rate = as_double();
      else if (key == "train.l2") cfg.training.l2_lambda = as_double();
      else if (key == "train.batch_size")
        cfg.training.batch_size = static_cast<int>(as_int(1, 1000000000));
      else if (key == "train.seed")
        cfg.training.seed = static_cast<std::uint64_t>(as_int(0, 0x7FFFFFFFFFFFFFFFL));
      else if (key == "scoring.mode") cfg.scoring_mode = parse_span_mode(value);
      else if (key == "data.dir") cfg.data_dir = value;
      else if (key == "registry") cfg.registry_path = value;
      else if (key == "output.dir") cfg.out_dir = value;
      else
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": unknown key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  return cfg;
}

inline std::string ExperimentConfig::echo() const {
  std::string out;
  out += "train.lang = " + train_lang + "\n";
  out += "eval.langs = ";
  for (std::size_t i = 0; i < eval_langs.size(); ++i)
    out += (i ? "," : "") + eval_langs[i];
  out += "\n";
  out += "input.form = " + std::string(to_string(input_form)) + "\n";
  for (const auto& [lang, path] : mapping_tables)
    out += "map." + lang + " = " + path + "\n";
  out += std::string("g2p.case = ") +
         (case_policy == CasePolicy::FoldToLower ? "fold" : "preserve") + "\n";
  out += std::string("g2p.unmapped = ") +
         (unmapped_policy == UnmappedPolicy::PassThrough ? "pass-through"
                                                         : "drop") +
         "\n";
  out += "segment.attach_modifiers = ";
  for (char32_t cp : segmenter.attach_modifiers) out += utf8_encode(cp);
  out += "\n";
  out += std::string("segment.join_tie_bar = ") +
         (segmenter.join_tie_bar ? "true" : "false") + "\n";
  out += "features.window = " + std::to_string(features.window) + "\n";
  out += std::string("features.identity = ") +
         (features.use_unit_identity ? "true" : "false") + "\n";
  out += std::string("features.affixes = ") +
         (features.use_affixes ? "true" : "false") + "\n";
  out += std::string("features.bigrams = ") +
         (features.use_bigrams ? "true" : "false") + "\n";
  out += "train.epochs = " + std::to_string(training.epochs) + "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", training.learning_rate);
  out += std::string("train.learning_rate = ") + buf + "\n";
  std::snprintf(buf, sizeof buf, "%.17g", training.l2_lambda);
  out += std::string("train.l2 = ") + buf + "\n";
  out += "train.batch_size = " + std::to_string(training.batch_size) + "\n";
  out += "train.seed = " + std::to_string(training.seed) + "\n";
  out += "scoring.mode = " + std::string(to_string(scoring_mode)) + "\n";
  out += "data.dir = " + data_dir + "\n";
  out += "registry = " + registry_path + "\n";
  out += "output.dir = " + out_dir + "\n";
  return out;
}

}  // namespace phoner
