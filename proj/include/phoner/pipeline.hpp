// Pipeline orchestration: unit conversion (characters or phoneme
// segments), the segment-corpus interchange format, and the end-to-end
// experiment runner. Every artifact is a plain file under the output
// directory and all output is byte-deterministic given the config.
#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "phoner/config.hpp"
#include "phoner/corpus.hpp"
#include "phoner/crf.hpp"
#include "phoner/eval.hpp"
#include "phoner/g2p.hpp"
#include "phoner/registry.hpp"
#include "phoner/segment.hpp"
#include "phoner/tags.hpp"

namespace phoner {

/// Splits every token into model units and projects the word tags onto
/// them. Phoneme form segments IPA tokens; grapheme form uses one unit
/// per codepoint.
inline std::vector<SegmentLabeledSentence> to_unit_sentences(
    const Corpus& corpus, Form unit_form, const SegmenterConfig& seg) {
  std::vector<SegmentLabeledSentence> out;
  out.reserve(corpus.sentences.size());
  for (std::size_t si = 0; si < corpus.sentences.size(); ++si) {
    const auto& s = corpus.sentences[si];
    try {
      SegmentLabeledSentence u;
      std::vector<std::size_t> counts;
      counts.reserve(s.tokens.size());
      for (const auto& token : s.tokens) {
        std::size_t n = 0;
        if (unit_form == Form::Phoneme) {
          for (auto& seg_text : segment_ipa(seg, token).segments) {
            u.segments.push_back(std::move(seg_text));
            ++n;
          }
        } else {
          for (char32_t cp : utf8_decode(token)) {
            u.segments.push_back(utf8_encode(cp));
            ++n;
          }
        }
        counts.push_back(n);
      }
      u.tags = project_tags(s.tags, counts);
      u.word_boundaries = std::move(counts);
      out.push_back(std::move(u));
    } catch (const std::exception& e) {
      throw std::runtime_error("sentence " + std::to_string(si + 1) + ": " +
                               e.what());
    }
  }
  return out;
}

/// Segment-corpus interchange format: `unit<TAB>tag<TAB>word-index` per
/// line, blank line terminates a sentence. Word indices are 0-based and
/// contiguous within a sentence.
inline std::string write_segment_corpus(
    std::span<const SegmentLabeledSentence> sentences) {
  std::string out;
  for (const auto& s : sentences) {
    if (s.segments.size() != s.tags.size())
      throw std::runtime_error("segment corpus: unit/tag length mismatch");
    std::size_t word = 0, left = s.word_boundaries.empty()
                                    ? s.segments.size()
                                    : s.word_boundaries[0];
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
      while (left == 0 && word + 1 < s.word_boundaries.size())
        left = s.word_boundaries[++word];
      out += s.segments[i];
      out += '\t';
      out += s.tags[i].str();
      out += '\t';
      out += std::to_string(word);
      out += '\n';
      --left;
    }
    out += '\n';
  }
  return out;
}

inline std::vector<SegmentLabeledSentence> parse_segment_corpus(
    std::string_view text) {
  std::vector<SegmentLabeledSentence> out;
  SegmentLabeledSentence cur;
  std::size_t prev_word = 0;
  auto flush = [&] {
    if (!cur.segments.empty()) {
      out.push_back(std::move(cur));
      cur = {};
      prev_word = 0;
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
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 =
        t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t1 == std::string_view::npos || t2 == std::string_view::npos ||
        line.find('\t', t2 + 1) != std::string_view::npos)
      throw std::runtime_error("segment corpus line " +
                               std::to_string(line_no) +
                               ": expected 3 tab-separated fields");
    const std::string unit(line.substr(0, t1));
    const std::string_view tag_text = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string word_text(line.substr(t2 + 1));
    if (unit.empty())
      throw std::runtime_error("segment corpus line " +
                               std::to_string(line_no) + ": empty unit");
    std::size_t word = 0;
    try {
      std::size_t used = 0;
      word = std::stoul(word_text, &used);
      if (used != word_text.size()) throw std::invalid_argument(word_text);
    } catch (const std::exception&) {
      throw std::runtime_error("segment corpus line " +
                               std::to_string(line_no) + ": bad word index '" +
                               word_text + "'");
    }
    const bool first = cur.segments.empty();
    if ((first && word != 0) ||
        (!first && word != prev_word && word != prev_word + 1))
      throw std::runtime_error("segment corpus line " +
                               std::to_string(line_no) +
                               ": word indices must be contiguous");
    Tag tag;
    try {
      tag = Tag::parse(tag_text);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("segment corpus line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    if (first || word == prev_word + 1) cur.word_boundaries.push_back(0);
    ++cur.word_boundaries.back();
    cur.segments.push_back(unit);
    cur.tags.push_back(tag);
    prev_word = word;
  }
  flush();
  return out;
}

/// Tag sequences from any labeled-sequence file: word corpora
/// (`token<TAB>tag`) and segment corpora (`unit<TAB>tag<TAB>word`) both
/// parse; only the tag column is kept.
inline std::vector<std::vector<Tag>> parse_tag_sequences(
    std::string_view text) {
  std::vector<std::vector<Tag>> out;
  std::vector<Tag> cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur = {};
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
    const std::size_t t1 = line.find('\t');
    if (t1 == std::string_view::npos)
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": expected at least 2 tab-separated fields");
    const std::size_t t2 = line.find('\t', t1 + 1);
    const std::string_view tag_text =
        line.substr(t1 + 1, (t2 == std::string_view::npos ? line.size() : t2) -
                                t1 - 1);
    try {
      cur.push_back(Tag::parse(tag_text));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  flush();
  return out;
}

/// Training-stage wrapper enforcing the split precondition.
inline CrfModel train_on_corpus(const Corpus& corpus, Form unit_form,
                                const SegmenterConfig& seg,
                                const FeatureTemplate& tmpl,
                                const TrainingConfig& config,
                                std::vector<double>* epoch_losses = nullptr) {
  if (corpus.split != Split::Train)
    throw std::invalid_argument("train: corpus split must be 'train'");
  if (corpus.sentences.empty())
    throw std::invalid_argument("train: empty corpus");
  const auto units = to_unit_sentences(corpus, unit_form, seg);
  return train(units, tmpl, config, epoch_losses);
}

struct ExperimentResult {
  std::map<std::string, ScoreTriple> scores;
  EvalReport report;
  std::string log;
};

/// Runs the full pipeline: (g2p ->) segment -> project -> train on the
/// training language, then decode, score and report every evaluation
/// language. Deterministic given the config, including the seed.
namespace detail {

template <typename F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw std::runtime_error(name + " stage failed: " + e.what());
  }
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.validate();

  const Registry registry = detail::stage("registry", [&] {
    return Registry::parse(read_file(cfg.registry_path));
  });
  const CaseGrouping cases = compute_cases(registry);

  // registry-ordered evaluation set
  std::vector<std::string> eval_langs;
  for (const auto& profile : registry.profiles())
    for (const auto& lang : cfg.eval_langs)
      if (lang == profile.code) eval_langs.push_back(lang);
  for (const auto& lang : cfg.eval_langs)
    registry.at(lang);  // unknown code is an error

  fs::create_directories(cfg.out_dir);
  auto out_path = [&](const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
  };
  write_file(out_path("config.echo"), cfg.echo());

  std::string log;
  log += "phoner experiment\n";
  log += "registry: " + std::to_string(registry.size()) + " languages\n";
  log += "input form: " + std::string(to_string(cfg.input_form)) + "\n";

  const std::string unit_level =
      cfg.input_form == Form::Phoneme ? "segment" : "character";

  auto prepare = [&](const std::string& lang, Split split)
      -> std::vector<SegmentLabeledSentence> {
    const std::string path = (fs::path(cfg.data_dir) /
                              (lang + "." + std::string(to_string(split)) +
                               ".tsv"))
                                 .string();
    Corpus corpus = detail::stage("load", [&] {
      return load_corpus_file(path, lang, split, Form::Grapheme);
    });
    const CorpusStats st = corpus_stats(corpus);
    log += std::string(to_string(split)) + " " + lang + ": " +
           std::to_string(st.sentences) + " sentences, " +
           std::to_string(st.tokens) + " tokens, " +
           std::to_string(st.entity_total()) + " entities\n";
    if (cfg.input_form == Form::Phoneme) {
      detail::stage("g2p", [&] {
        const MappingTable table = MappingTable::load(
            cfg.mapping_tables.at(lang), lang, cfg.case_policy);
        G2pSummary summary;
        corpus = transliterate_corpus(table, corpus, cfg.unmapped_policy,
                                      &summary);
        write_file(out_path("corpus." + lang + "." +
                            std::string(to_string(split)) + ".phoneme.tsv"),
                   write_corpus(corpus));
        log += "g2p " + lang + ": " + std::to_string(summary.tokens) +
               " tokens, " + std::to_string(summary.unmapped_total) +
               " unmapped characters (" +
               std::to_string(summary.unmapped_by_grapheme.size()) +
               " distinct)\n";
        return 0;
      });
    }
    return detail::stage("project", [&] {
      return to_unit_sentences(corpus, cfg.input_form, cfg.segmenter);
    });
  };

  // train
  const auto train_units = prepare(cfg.train_lang, Split::Train);
  write_file(out_path("units." + cfg.train_lang + ".train.tsv"),
             write_segment_corpus(train_units));
  const CrfModel model = detail::stage("train", [&] {
    return train(train_units, cfg.features, cfg.training);
  });
  {
    std::string model_text = model.save_string();
    write_file(out_path("model.crf"), model_text);
  }
  log += "model: " + std::to_string(model.num_features()) + " features, " +
         std::to_string(model.num_tags()) + " tags\n";

  // evaluate
  ExperimentResult result;
  std::string scores_tsv;
  for (const auto& lang : eval_langs) {
    auto units = prepare(lang, Split::Test);
    std::vector<std::vector<Tag>> gold, pred;
    gold.reserve(units.size());
    pred.reserve(units.size());
    detail::stage("tag", [&] {
      for (auto& sentence : units) {
        gold.push_back(sentence.tags);
        sentence.tags = viterbi_decode(model, sentence.segments);
        pred.push_back(sentence.tags);
      }
      return 0;
    });
    write_file(out_path("pred." + lang + ".tsv"),
               write_segment_corpus(units));
    const ScoreTriple triple = detail::stage("eval", [&] {
      return span_f1(gold, pred, cfg.scoring_mode);
    });
    result.scores[lang] = triple;
    scores_tsv += lang + "\t" + detail::fmt4(triple.precision) + "\t" +
                  detail::fmt4(triple.recall) + "\t" +
                  detail::fmt4(triple.f1) + "\n";
    log += "eval " + lang + ": P=" + detail::fmt2(triple.precision) +
           " R=" + detail::fmt2(triple.recall) +
           " F1=" + detail::fmt2(triple.f1) + "\n";
  }
  write_file(out_path("scores.tsv"), scores_tsv);

  result.report = build_report(result.scores, cases, registry,
                               std::string(to_string(cfg.scoring_mode)),
                               unit_level);
  write_file(out_path("report.tsv"), write_report_tsv(result.report));
  write_file(out_path("report.kv"), write_report_kv(result.report));
  result.log = log;
  write_file(out_path("experiment.log"), log);
  return result;
}

}  // namespace phoner
