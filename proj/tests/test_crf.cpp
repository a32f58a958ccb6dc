#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "phoner/crf.hpp"
#include "phoner/eval.hpp"

using namespace phoner;
using oracles::brute_best_score;
using oracles::brute_log_partition;
using oracles::make_random_instance;
using oracles::RandomInstance;

namespace {

std::vector<SegmentLabeledSentence> toy_training_data() {
  // tiny memorizable corpus: names are PER, places are LOC
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"ana likes lima", "P O L"},   {"bo sees kyo", "P O L"},
      {"ana visits kyo", "P O L"},   {"bo likes lima", "P O L"},
      {"mia sees ana", "P O P"},     {"kyo hosts mia", "L O P"},
      {"lima hosts bo", "L O P"},    {"mia visits lima", "P O L"},
      {"ana meets bo", "P O P"},     {"kyo and lima", "L O L"},
  };
  std::vector<SegmentLabeledSentence> data;
  for (const auto& [words, labels] : rows) {
    SegmentLabeledSentence s;
    std::istringstream ws(words), ls(labels);
    std::string word, label;
    while (ws >> word && ls >> label) {
      const Tag word_tag = label == "P"   ? Tag::B(EntityType::PER)
                           : label == "L" ? Tag::B(EntityType::LOC)
                                          : Tag::O();
      Tag tag = word_tag;
      s.word_boundaries.push_back(word.size());
      for (std::size_t i = 0; i < word.size(); ++i) {
        s.segments.push_back(std::string(1, word[i]));
        s.tags.push_back(tag);
        if (tag.kind == Tag::Kind::B) tag = Tag::I(tag.type);
      }
    }
    data.push_back(std::move(s));
  }
  return data;
}

}  // namespace

TEST_CASE("extract_features emits the documented strings", "[crf]") {
  const std::vector<std::string> one = {"b"};
  CHECK(extract_features(FeatureTemplate{0, true, false, false}, one, 0) ==
        std::vector<std::string>{"bias", "u0=b"});

  const std::vector<std::string> two = {"b", "ɛ"};
  const auto feats = extract_features(FeatureTemplate{1, true, false, false},
                                      two, 0);
  CHECK(feats == std::vector<std::string>{"bias", "u-1=<BOS>", "u0=b",
                                          "u+1=ɛ"});

  // affixes and bigrams
  const std::vector<std::string> word = {"chi", "na"};
  const auto full =
      extract_features(FeatureTemplate{0, false, true, true}, word, 0);
  CHECK(full == std::vector<std::string>{"bias", "p1=c", "p2=ch", "p3=chi",
                                         "s1=i", "s2=hi", "s3=chi",
                                         "b-1=<BOS>|chi", "b+1=chi|na"});

  // determinism
  CHECK(extract_features(FeatureTemplate{}, two, 1) ==
        extract_features(FeatureTemplate{}, two, 1));
  CHECK_THROWS_AS(extract_features(FeatureTemplate{}, two, 2),
                  std::invalid_argument);
}

TEST_CASE("zero weights give the uniform distribution", "[crf]") {
  std::mt19937 rng(1);
  for (int iter = 0; iter < 10; ++iter) {
    RandomInstance inst = make_random_instance(rng, 6, 4);
    inst.model.reset_weights();  // zero
    const std::size_t K = inst.model.num_tags();
    const std::size_t T = inst.units.size();
    const Marginals m = forward_backward(inst.model, inst.units);
    CHECK(m.log_partition ==
          Catch::Approx(static_cast<double>(T) * std::log(K)).margin(1e-9));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t y = 0; y < K; ++y)
        CHECK(m.unary_at(t, y) == Catch::Approx(1.0 / K).margin(1e-9));
  }
}

TEST_CASE("log partition matches brute-force enumeration", "[crf]") {
  std::mt19937 rng(20240903);
  for (int iter = 0; iter < 100; ++iter) {
    const RandomInstance inst = make_random_instance(rng, 5, 4);
    const auto feats = inst.model.featurize(inst.units);
    const Marginals m = forward_backward_feats(inst.model, feats);
    CHECK(m.log_partition ==
          Catch::Approx(brute_log_partition(inst.model, feats)).margin(1e-9));
  }
}

TEST_CASE("marginals are consistent", "[crf]") {
  std::mt19937 rng(5);
  for (int iter = 0; iter < 50; ++iter) {
    const RandomInstance inst = make_random_instance(rng, 6, 4);
    const Marginals m = forward_backward(inst.model, inst.units);
    const std::size_t K = m.num_tags;
    for (std::size_t t = 0; t < m.length; ++t) {
      double sum = 0.0;
      for (std::size_t y = 0; y < K; ++y) sum += m.unary_at(t, y);
      CHECK(sum == Catch::Approx(1.0).margin(1e-9));
    }
    for (std::size_t t = 1; t < m.length; ++t)
      for (std::size_t y = 0; y < K; ++y) {
        double over_prev = 0.0;
        for (std::size_t yp = 0; yp < K; ++yp)
          over_prev += m.pairwise_at(t, yp, y);
        CHECK(over_prev == Catch::Approx(m.unary_at(t, y)).margin(1e-9));
        double over_next = 0.0;
        for (std::size_t yn = 0; yn < K; ++yn)
          over_next += m.pairwise_at(t, y, yn);
        CHECK(over_next == Catch::Approx(m.unary_at(t - 1, y)).margin(1e-9));
      }
  }
}

TEST_CASE("forward_backward rejects bad input", "[crf]") {
  CrfModel model;
  model.tag_set = ner_tag_set();
  model.reset_weights();
  CHECK_THROWS_AS(forward_backward(model, std::vector<std::string>{}),
                  std::invalid_argument);
  model.transition[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH(forward_backward(model, std::vector<std::string>{"a"}),
                    Catch::Matchers::ContainsSubstring("non-finite"));
}

TEST_CASE("viterbi matches exhaustive argmax", "[crf]") {
  std::mt19937 rng(20240904);
  for (int iter = 0; iter < 100; ++iter) {
    const RandomInstance inst = make_random_instance(rng, 8, 4);
    const auto feats = inst.model.featurize(inst.units);
    const auto path = viterbi_decode(inst.model, inst.units);
    std::vector<std::size_t> ids;
    for (const Tag& t : path) ids.push_back(inst.model.tag_id(t));
    CHECK(sequence_score(inst.model, feats, ids) ==
          Catch::Approx(brute_best_score(inst.model, feats)).margin(1e-9));
  }
}

TEST_CASE("viterbi ties break toward the lowest tag index", "[crf]") {
  CrfModel model;
  model.tag_set = ner_tag_set();
  model.tmpl = FeatureTemplate{};
  model.reset_weights();
  const std::vector<std::string> units = {"x", "y", "z"};
  const auto path = viterbi_decode(model, units);
  for (const Tag& t : path) CHECK(t == model.tag_set[0]);
}

TEST_CASE("viterbi recovers a separable instance", "[crf]") {
  // one dominant emission feature per unit forces the gold path
  CrfModel model;
  model.tag_set = ner_tag_set();
  model.tmpl = FeatureTemplate{0, true, false, false};
  const std::vector<std::string> units = {"a", "b", "c"};
  const std::vector<Tag> gold = {Tag::B(EntityType::PER),
                                 Tag::I(EntityType::PER), Tag::O()};
  for (std::size_t t = 0; t < units.size(); ++t)
    for (const auto& f : extract_features(model.tmpl, units, t))
      model.intern_feature(f);
  model.reset_weights();
  for (std::size_t t = 0; t < units.size(); ++t) {
    const auto id = model.find_feature("u0=" + units[t]);
    REQUIRE(id.has_value());
    model.emission[*id * model.num_tags() + model.tag_id(gold[t])] = 5.0;
  }
  CHECK(viterbi_decode(model, units) == gold);
}

TEST_CASE("viterbi path scores at least the gold path", "[crf]") {
  std::mt19937 rng(6);
  for (int iter = 0; iter < 50; ++iter) {
    const RandomInstance inst = make_random_instance(rng, 7, 4);
    const auto feats = inst.model.featurize(inst.units);
    std::vector<std::size_t> gold;
    for (std::size_t t = 0; t < inst.units.size(); ++t)
      gold.push_back(rng() % inst.model.num_tags());
    std::vector<std::size_t> decoded;
    for (const Tag& t : viterbi_decode(inst.model, inst.units))
      decoded.push_back(inst.model.tag_id(t));
    CHECK(sequence_score(inst.model, feats, decoded) >=
          sequence_score(inst.model, feats, gold) - 1e-12);
  }
}

TEST_CASE("zero-weight loss equals sum of T log K", "[crf]") {
  const auto data = toy_training_data();
  CrfModel model;
  model.tag_set = ner_tag_set();
  model.tmpl = FeatureTemplate{};
  for (const auto& s : data)
    for (std::size_t p = 0; p < s.segments.size(); ++p)
      for (const auto& f : extract_features(model.tmpl, s.segments, p))
        model.intern_feature(f);
  model.reset_weights();
  const LossGrad lg = nll_gradient(model, data, 0.0);
  double expected = 0.0;
  for (const auto& s : data)
    expected += static_cast<double>(s.segments.size()) *
                std::log(static_cast<double>(model.num_tags()));
  CHECK(lg.loss == Catch::Approx(expected).margin(1e-9));
}

TEST_CASE("gradient matches central finite differences", "[crf]") {
  std::mt19937 rng(20240905);
  const double step = 1e-5;
  for (int iter = 0; iter < 20; ++iter) {
    RandomInstance inst = make_random_instance(rng, 5, 4);
    // batch of 3 short sentences over the same alphabet
    std::vector<SegmentLabeledSentence> batch;
    const char* alphabet[] = {"a", "b", "c"};
    for (int s = 0; s < 3; ++s) {
      SegmentLabeledSentence sent;
      const std::size_t T = 1 + rng() % 4;
      for (std::size_t t = 0; t < T; ++t) {
        sent.segments.push_back(alphabet[rng() % 3]);
        sent.tags.push_back(inst.model.tag_set[rng() % inst.model.num_tags()]);
      }
      sent.word_boundaries = {T};
      batch.push_back(std::move(sent));
      for (std::size_t t = 0; t < batch.back().segments.size(); ++t)
        for (const auto& f :
             extract_features(inst.model.tmpl, batch.back().segments, t))
          inst.model.intern_feature(f);
    }
    // interning may have grown the matrix; re-randomize all weights
    std::uniform_real_distribution<double> w(-1.0, 1.0);
    for (double& x : inst.model.emission) x = w(rng);
    for (double& x : inst.model.transition) x = w(rng);

    const double lambda = (iter % 2 == 0) ? 0.0 : 0.05;
    const LossGrad lg = nll_gradient(inst.model, batch, lambda);

    auto check_param = [&](std::vector<double>& weights, std::size_t i,
                           double analytic) {
      const double saved = weights[i];
      weights[i] = saved + step;
      const double up = nll_gradient(inst.model, batch, lambda).loss;
      weights[i] = saved - step;
      const double down = nll_gradient(inst.model, batch, lambda).loss;
      weights[i] = saved;
      const double fd = (up - down) / (2 * step);
      const double scale = std::max({1.0, std::abs(analytic), std::abs(fd)});
      CHECK(std::abs(analytic - fd) <= 1e-4 * scale);
    };
    for (std::size_t i = 0; i < inst.model.emission.size(); ++i)
      check_param(inst.model.emission, i, lg.d_emission[i]);
    for (std::size_t i = 0; i < inst.model.transition.size(); ++i)
      check_param(inst.model.transition, i, lg.d_transition[i]);
  }
}

TEST_CASE("duplicating a batch doubles the data term", "[crf]") {
  std::mt19937 rng(8);
  RandomInstance inst = make_random_instance(rng, 5, 4);
  std::vector<SegmentLabeledSentence> batch;
  for (int s = 0; s < 2; ++s) {
    SegmentLabeledSentence sent;
    sent.segments = {"a", "b"};
    sent.tags = {inst.model.tag_set[rng() % inst.model.num_tags()],
                 inst.model.tag_set[rng() % inst.model.num_tags()]};
    sent.word_boundaries = {2};
    batch.push_back(sent);
  }
  std::vector<SegmentLabeledSentence> doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());

  const double lambda = 0.01;
  const LossGrad one = nll_gradient(inst.model, batch, lambda);
  const LossGrad two = nll_gradient(inst.model, doubled, lambda);

  double reg = 0.0;
  for (double x : inst.model.emission) reg += x * x;
  for (double x : inst.model.transition) reg += x * x;
  reg *= 0.5 * lambda;
  CHECK(two.loss - reg == Catch::Approx(2 * (one.loss - reg)).margin(1e-9));
  for (std::size_t i = 0; i < one.d_emission.size(); ++i) {
    const double data_one = one.d_emission[i] - lambda * inst.model.emission[i];
    const double data_two = two.d_emission[i] - lambda * inst.model.emission[i];
    CHECK(data_two == Catch::Approx(2 * data_one).margin(1e-9));
  }
}

TEST_CASE("nll_gradient rejects tags outside the tag set", "[crf]") {
  CrfModel model;
  model.tag_set = {Tag::O(), Tag::B(EntityType::PER)};
  model.reset_weights();
  std::vector<SegmentLabeledSentence> batch(1);
  batch[0].segments = {"a"};
  batch[0].tags = {Tag::B(EntityType::LOC)};
  CHECK_THROWS_WITH(nll_gradient(model, batch, 0.0),
                    Catch::Matchers::ContainsSubstring("outside"));
  CHECK_THROWS_AS(
      nll_gradient(model, std::vector<SegmentLabeledSentence>{}, 0.0),
      std::invalid_argument);
}

TEST_CASE("zero epochs returns the zero-weight model", "[crf]") {
  const auto data = toy_training_data();
  TrainingConfig cfg;
  cfg.epochs = 0;
  const CrfModel model = train(data, FeatureTemplate{}, cfg);
  for (double w : model.emission) CHECK(w == 0.0);
  for (double w : model.transition) CHECK(w == 0.0);
  CHECK(model.num_features() > 0);
}

TEST_CASE("training is deterministic given the seed", "[crf]") {
  const auto data = toy_training_data();
  TrainingConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 3;
  cfg.seed = 1234;
  const CrfModel a = train(data, FeatureTemplate{}, cfg);
  const CrfModel b = train(data, FeatureTemplate{}, cfg);
  CHECK(a.save_string() == b.save_string());
  CHECK(a.emission == b.emission);
  CHECK(a.transition == b.transition);
}

TEST_CASE("full-batch loss decreases monotonically", "[crf]") {
  const auto data = toy_training_data();
  TrainingConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 1000;  // full batch
  cfg.learning_rate = 0.05;
  cfg.l2_lambda = 1e-3;
  std::vector<double> losses;
  train(data, FeatureTemplate{}, cfg, &losses);
  REQUIRE(losses.size() == 30);
  for (std::size_t e = 1; e < losses.size(); ++e)
    CHECK(losses[e] <= losses[e - 1] + 1e-9);
}

TEST_CASE("a CRF memorizes a tiny corpus", "[crf]") {
  const auto data = toy_training_data();
  TrainingConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.2;
  cfg.l2_lambda = 1e-4;
  const CrfModel model = train(data, FeatureTemplate{}, cfg);
  std::vector<std::vector<Tag>> gold, pred;
  for (const auto& s : data) {
    gold.push_back(s.tags);
    pred.push_back(viterbi_decode(model, s.segments));
  }
  const ScoreTriple t = span_f1(gold, pred, SpanMode::Lenient);
  CHECK(t.f1 >= 95.0);
}

TEST_CASE("model files round trip bit-exactly", "[crf]") {
  const auto data = toy_training_data();
  TrainingConfig cfg;
  cfg.epochs = 3;
  const CrfModel model = train(data, FeatureTemplate{}, cfg);
  const std::string text = model.save_string();
  const CrfModel loaded = CrfModel::parse(text);
  CHECK(loaded.save_string() == text);
  CHECK(loaded.emission == model.emission);
  CHECK(loaded.transition == model.transition);
  // loaded model decodes identically
  for (const auto& s : data)
    CHECK(viterbi_decode(loaded, s.segments) ==
          viterbi_decode(model, s.segments));
}

TEST_CASE("model loader rejects corrupt files", "[crf]") {
  CHECK_THROWS_WITH(CrfModel::parse("not-a-model\n"),
                    Catch::Matchers::ContainsSubstring("magic"));
  const auto data = toy_training_data();
  TrainingConfig cfg;
  cfg.epochs = 1;
  const std::string good = train(data, FeatureTemplate{}, cfg).save_string();
  CHECK_THROWS_AS(CrfModel::parse(good.substr(0, good.size() / 2)),
                  std::runtime_error);
}
