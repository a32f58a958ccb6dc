// phoner command-line tool: run each pipeline stage standalone or a
// full configured experiment.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "phoner/config.hpp"
#include "phoner/corpus.hpp"
#include "phoner/crf.hpp"
#include "phoner/eval.hpp"
#include "phoner/g2p.hpp"
#include "phoner/pipeline.hpp"
#include "phoner/registry.hpp"
#include "phoner/segment.hpp"
#include "phoner/tags.hpp"

namespace {

using namespace phoner;

struct SegmentFlags {
  std::string attach_modifiers;
  bool join_tie_bar = false;

  SegmenterConfig build() const {
    SegmenterConfig cfg;
    cfg.join_tie_bar = join_tie_bar;
    if (!attach_modifiers.empty()) {
      cfg.attach_modifiers.clear();
      for (char32_t cp : utf8_decode(attach_modifiers))
        cfg.attach_modifiers.insert(cp);
    }
    return cfg;
  }
};

void add_segment_flags(CLI::App* cmd, SegmentFlags& flags) {
  cmd->add_option("--attach-modifiers", flags.attach_modifiers,
                  "Modifier characters that bind to the preceding base "
                  "(default: aspiration, secondary articulation and length "
                  "marks)");
  cmd->add_flag("--join-tie-bar", flags.join_tie_bar,
                "Tie bar joins the following base into the same segment");
}

int run(int argc, char** argv) {
  CLI::App app{"phoner: zero-shot cross-lingual NER over IPA phonemes"};
  app.require_subcommand(1);

  // ---- g2p ----------------------------------------------------------
  auto* g2p_cmd = app.add_subcommand(
      "g2p", "Transliterate a corpus (or one word) to IPA");
  std::string g2p_table, g2p_lang = "und", g2p_word, g2p_policy = "pass-through",
              g2p_case = "fold", g2p_in, g2p_out;
  g2p_cmd->add_option("--table", g2p_table, "Mapping table file")->required();
  g2p_cmd->add_option("--lang", g2p_lang, "ISO 639-3 language code");
  g2p_cmd->add_option("--policy", g2p_policy, "Unmapped policy: pass-through|drop");
  g2p_cmd->add_option("--case", g2p_case, "Case policy: fold|preserve");
  g2p_cmd->add_option("--word", g2p_word, "Transliterate a single word and exit");
  g2p_cmd->add_option("input", g2p_in, "Input corpus (token<TAB>tag lines)");
  g2p_cmd->add_option("output", g2p_out, "Output corpus path");

  // ---- segment ------------------------------------------------------
  auto* seg_cmd = app.add_subcommand(
      "segment", "Segment IPA words (one per line) into phonemes");
  SegmentFlags seg_flags;
  std::string seg_in, seg_out;
  add_segment_flags(seg_cmd, seg_flags);
  seg_cmd->add_option("input", seg_in, "File of IPA words, one per line")
      ->required();
  seg_cmd->add_option("output", seg_out, "Output path (default: stdout)");

  // ---- project ------------------------------------------------------
  auto* proj_cmd = app.add_subcommand(
      "project", "Split corpus tokens into units and project BIO tags");
  SegmentFlags proj_flags;
  std::string proj_form = "phoneme", proj_in, proj_out, proj_lang = "und";
  proj_cmd->add_option("--form", proj_form, "Unit form: grapheme|phoneme");
  proj_cmd->add_option("--lang", proj_lang, "Corpus language code");
  add_segment_flags(proj_cmd, proj_flags);
  proj_cmd->add_option("input", proj_in, "Input corpus")->required();
  proj_cmd->add_option("output", proj_out, "Output segment corpus")->required();

  // ---- train --------------------------------------------------------
  auto* train_cmd = app.add_subcommand(
      "train", "Train a CRF on a projected segment corpus");
  std::string train_in, train_model;
  TrainingConfig train_cfg;
  FeatureTemplate train_tmpl;
  bool no_identity = false, no_affixes = false, no_bigrams = false;
  train_cmd->add_option("input", train_in, "Training segment corpus")
      ->required();
  train_cmd->add_option("--model", train_model, "Model output path")
      ->required();
  train_cmd->add_option("--epochs", train_cfg.epochs, "Training epochs");
  train_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate");
  train_cmd->add_option("--l2", train_cfg.l2_lambda, "L2 regularization");
  train_cmd->add_option("--batch", train_cfg.batch_size, "Batch size");
  train_cmd->add_option("--seed", train_cfg.seed, "RNG seed");
  train_cmd->add_option("--window", train_tmpl.window, "Feature window half-width");
  train_cmd->add_flag("--no-identity", no_identity, "Disable identity features");
  train_cmd->add_flag("--no-affixes", no_affixes, "Disable affix features");
  train_cmd->add_flag("--no-bigrams", no_bigrams, "Disable bigram features");

  // ---- tag ----------------------------------------------------------
  auto* tag_cmd = app.add_subcommand(
      "tag", "Decode a segment corpus with a trained model");
  std::string tag_model, tag_in, tag_out;
  tag_cmd->add_option("--model", tag_model, "Model file")->required();
  tag_cmd->add_option("input", tag_in, "Input segment corpus")->required();
  tag_cmd->add_option("output", tag_out, "Output segment corpus")->required();

  // ---- eval ---------------------------------------------------------
  auto* eval_cmd = app.add_subcommand(
      "eval", "Span-level P/R/F1 of predictions against gold");
  std::string eval_gold, eval_pred, eval_mode = "lenient", eval_scores,
              eval_lang;
  eval_cmd->add_option("gold", eval_gold, "Gold corpus or segment corpus")
      ->required();
  eval_cmd->add_option("pred", eval_pred, "Predicted corpus")->required();
  eval_cmd->add_option("--mode", eval_mode, "Span mode: strict|lenient");
  eval_cmd->add_option("--scores", eval_scores,
                       "Append 'lang P R F1' to this scores file");
  eval_cmd->add_option("--lang", eval_lang, "Language code for --scores");

  // ---- report -------------------------------------------------------
  auto* report_cmd = app.add_subcommand(
      "report", "Aggregate per-language scores into the full report");
  std::string report_scores, report_registry, report_out, report_kv;
  std::string report_mode = "lenient", report_unit = "segment";
  report_cmd->add_option("--scores", report_scores, "Per-language scores file")
      ->required();
  report_cmd->add_option("--registry", report_registry, "Language registry")
      ->required();
  report_cmd->add_option("--out", report_out, "Report output path (default: stdout)");
  report_cmd->add_option("--kv", report_kv, "Also write key=value dump here");
  report_cmd->add_option("--mode", report_mode, "Metadata: scoring mode");
  report_cmd->add_option("--unit", report_unit, "Metadata: unit level");

  // ---- experiment ---------------------------------------------------
  auto* exp_cmd = app.add_subcommand(
      "experiment", "Run the full configured pipeline");
  std::string exp_config, exp_out, exp_form;
  std::int64_t exp_seed = -1;
  exp_cmd->add_option("--config", exp_config, "Experiment config file")
      ->required();
  exp_cmd->add_option("--out", exp_out, "Override output.dir");
  exp_cmd->add_option("--form", exp_form, "Override input.form");
  exp_cmd->add_option("--seed", exp_seed, "Override train.seed");

  CLI11_PARSE(app, argc, argv);

  if (g2p_cmd->parsed()) {
    const MappingTable table =
        MappingTable::load(g2p_table, g2p_lang, parse_case_policy(g2p_case));
    const UnmappedPolicy policy = parse_unmapped_policy(g2p_policy);
    if (!g2p_word.empty()) {
      const TransliterationResult r =
          transliterate_word(table, g2p_word, policy);
      std::cout << r.ipa << "\n";
      for (const auto& u : r.unmapped)
        std::cerr << "unmapped at " << u.position << ": '" << u.grapheme
                  << "'\n";
      return 0;
    }
    if (g2p_in.empty() || g2p_out.empty())
      throw std::runtime_error("g2p: need input and output paths (or --word)");
    const Corpus corpus =
        load_corpus_file(g2p_in, g2p_lang, Split::Train, Form::Grapheme);
    G2pSummary summary;
    const Corpus converted =
        transliterate_corpus(table, corpus, policy, &summary);
    write_file(g2p_out, write_corpus(converted));
    std::cerr << "g2p: " << summary.tokens << " tokens, "
              << summary.unmapped_total << " unmapped characters ("
              << summary.unmapped_by_grapheme.size() << " distinct)\n";
    return 0;
  }

  if (seg_cmd->parsed()) {
    const SegmenterConfig cfg = seg_flags.build();
    const std::string text = read_file(seg_in);
    std::string out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t eol = text.find('\n', pos);
      std::string_view line = std::string_view(text).substr(
          pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
      const bool last = eol == std::string_view::npos;
      pos = last ? text.size() + 1 : eol + 1;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (last && line.empty()) break;
      const SegmentedWord word = segment_ipa(cfg, line);
      for (std::size_t i = 0; i < word.segments.size(); ++i)
        out += (i ? "|" : "") + word.segments[i];
      out += '\n';
    }
    if (seg_out.empty())
      std::cout << out;
    else
      write_file(seg_out, out);
    return 0;
  }

  if (proj_cmd->parsed()) {
    const Form form = parse_form(proj_form);
    const Corpus corpus =
        load_corpus_file(proj_in, proj_lang, Split::Train, form);
    const auto units = to_unit_sentences(corpus, form, proj_flags.build());
    write_file(proj_out, write_segment_corpus(units));
    return 0;
  }

  if (train_cmd->parsed()) {
    train_tmpl.use_unit_identity = !no_identity;
    train_tmpl.use_affixes = !no_affixes;
    train_tmpl.use_bigrams = !no_bigrams;
    const auto data = parse_segment_corpus(read_file(train_in));
    std::vector<double> losses;
    const CrfModel model = train(data, train_tmpl, train_cfg, &losses);
    write_file(train_model, model.save_string());
    std::cerr << "train: " << data.size() << " sentences, "
              << model.num_features() << " features";
    if (!losses.empty())
      std::cerr << ", loss " << losses.front() << " -> " << losses.back();
    std::cerr << "\n";
    return 0;
  }

  if (tag_cmd->parsed()) {
    std::ifstream in(tag_model);
    if (!in) throw std::runtime_error("cannot open '" + tag_model + "'");
    const CrfModel model = CrfModel::load(in);
    auto sentences = parse_segment_corpus(read_file(tag_in));
    for (auto& s : sentences) s.tags = viterbi_decode(model, s.segments);
    write_file(tag_out, write_segment_corpus(sentences));
    return 0;
  }

  if (eval_cmd->parsed()) {
    auto tags_of = [](const std::string& path) {
      try {
        return parse_tag_sequences(read_file(path));
      } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
      }
    };
    const SpanMode mode = parse_span_mode(eval_mode);
    const ScoreTriple t = span_f1(tags_of(eval_gold), tags_of(eval_pred), mode);
    std::printf("P=%.2f R=%.2f F1=%.2f\n", t.precision, t.recall, t.f1);
    if (!eval_scores.empty()) {
      if (eval_lang.empty())
        throw std::runtime_error("eval: --scores requires --lang");
      std::ofstream scores(eval_scores, std::ios::app);
      if (!scores)
        throw std::runtime_error("cannot write '" + eval_scores + "'");
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s\t%.4f\t%.4f\t%.4f\n",
                    eval_lang.c_str(), t.precision, t.recall, t.f1);
      scores << buf;
    }
    return 0;
  }

  if (report_cmd->parsed()) {
    const Registry registry = Registry::parse(read_file(report_registry));
    const auto scores = parse_scores(read_file(report_scores));
    const EvalReport report =
        build_report(scores, compute_cases(registry), registry, report_mode,
                     report_unit);
    const std::string tsv = write_report_tsv(report);
    if (report_out.empty())
      std::cout << tsv;
    else
      write_file(report_out, tsv);
    if (!report_kv.empty()) write_file(report_kv, write_report_kv(report));
    return 0;
  }

  if (exp_cmd->parsed()) {
    ExperimentConfig cfg = ExperimentConfig::load(exp_config);
    if (!exp_out.empty()) cfg.out_dir = exp_out;
    if (!exp_form.empty()) cfg.input_form = parse_form(exp_form);
    if (exp_seed >= 0) cfg.training.seed = static_cast<std::uint64_t>(exp_seed);
    const ExperimentResult result = run_experiment(cfg);
    std::cout << write_report_tsv(result.report);
    std::cerr << "experiment: artifacts in " << cfg.out_dir << "\n";
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
