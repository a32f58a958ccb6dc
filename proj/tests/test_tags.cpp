#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "phoner/tags.hpp"

using namespace phoner;

namespace {

std::vector<Tag> parse_tags(const std::vector<std::string>& strs) {
  std::vector<Tag> tags;
  for (const auto& s : strs) tags.push_back(Tag::parse(s));
  return tags;
}

std::vector<Tag> random_tags(std::mt19937& rng, std::size_t n) {
  std::vector<Tag> tags;
  for (std::size_t i = 0; i < n; ++i) {
    const auto type = static_cast<EntityType>(rng() % 3);
    switch (rng() % 4) {
      case 0: tags.push_back(Tag::B(type)); break;
      case 1: tags.push_back(Tag::I(type)); break;
      default: tags.push_back(Tag::O()); break;
    }
  }
  return tags;
}

}  // namespace

TEST_CASE("tag surface syntax round trips", "[tags]") {
  for (const char* s : {"O", "B-PER", "I-PER", "B-ORG", "I-ORG", "B-LOC",
                        "I-LOC"})
    CHECK(Tag::parse(s).str() == s);
  CHECK_THROWS_AS(Tag::parse("B-FOO"), std::invalid_argument);
  CHECK_THROWS_AS(Tag::parse("X-PER"), std::invalid_argument);
  CHECK_THROWS_AS(Tag::parse("b-per"), std::invalid_argument);
  CHECK_THROWS_AS(Tag::parse(""), std::invalid_argument);
  CHECK_THROWS_AS(Tag::parse("B-PER "), std::invalid_argument);
  CHECK(Tag::O() == Tag::parse("O"));
}

TEST_CASE("project_tags fans word tags onto segments", "[tags]") {
  // a nine-segment person name: B on the first segment only
  const auto nine = project_tags(parse_tags({"B-PER"}), {9});
  REQUIRE(nine.size() == 9);
  CHECK(nine[0] == Tag::B(EntityType::PER));
  for (std::size_t i = 1; i < 9; ++i) CHECK(nine[i] == Tag::I(EntityType::PER));

  const auto os = project_tags(parse_tags({"O", "O"}), {3, 2});
  CHECK(os == std::vector<Tag>(5, Tag::O()));

  const auto loc = project_tags(parse_tags({"B-LOC", "I-LOC"}), {3, 4});
  REQUIRE(loc.size() == 7);
  CHECK(loc[0] == Tag::B(EntityType::LOC));
  for (std::size_t i = 1; i < 7; ++i) CHECK(loc[i] == Tag::I(EntityType::LOC));
}

TEST_CASE("project_tags rejects bad input", "[tags]") {
  CHECK_THROWS_WITH(project_tags(parse_tags({"B-PER", "O"}), {3, 0}),
                    Catch::Matchers::ContainsSubstring("zero"));
  CHECK_THROWS_AS(project_tags(parse_tags({"O"}), {1, 1}),
                  std::invalid_argument);
}

TEST_CASE("projection preserves entity count and well-formedness", "[tags]") {
  std::mt19937 rng(99);
  for (int iter = 0; iter < 300; ++iter) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<Tag> word_tags = random_tags(rng, n);
    std::vector<std::size_t> counts;
    for (std::size_t i = 0; i < n; ++i) counts.push_back(1 + rng() % 4);
    const auto seg_tags = project_tags(word_tags, counts);

    std::size_t total = 0;
    for (auto c : counts) total += c;
    CHECK(seg_tags.size() == total);

    auto count_b = [](const std::vector<Tag>& tags) {
      return std::count_if(tags.begin(), tags.end(), [](const Tag& t) {
        return t.kind == Tag::Kind::B;
      });
    };
    CHECK(count_b(seg_tags) == count_b(word_tags));

    // strict-BIO validity carries over
    if (validate_bio(word_tags).empty()) CHECK(validate_bio(seg_tags).empty());

    // spans map through cumulative counts, in both modes
    std::vector<std::size_t> cum(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + counts[i];
    for (auto mode : {SpanMode::Strict, SpanMode::Lenient}) {
      std::vector<EntitySpan> mapped;
      for (const auto& s : extract_spans(word_tags, mode))
        mapped.push_back({cum[s.start], cum[s.end], s.type});
      CHECK(extract_spans(seg_tags, mode) == mapped);
    }
  }
}

TEST_CASE("extract_spans handles the canonical cases", "[tags]") {
  const auto simple = extract_spans(parse_tags({"B-PER", "I-PER", "O"}),
                                    SpanMode::Strict);
  CHECK(simple == std::vector<EntitySpan>{{0, 2, EntityType::PER}});

  const auto dangling = parse_tags({"I-LOC", "I-LOC"});
  CHECK(extract_spans(dangling, SpanMode::Lenient) ==
        std::vector<EntitySpan>{{0, 2, EntityType::LOC}});
  std::vector<BioViolation> violations;
  CHECK(extract_spans(dangling, SpanMode::Strict, &violations).empty());
  CHECK(violations.size() == 1);
  CHECK(violations[0].position == 0);

  const auto mixed = extract_spans(parse_tags({"B-PER", "I-LOC"}),
                                   SpanMode::Lenient);
  CHECK(mixed == std::vector<EntitySpan>{{0, 1, EntityType::PER},
                                         {1, 2, EntityType::LOC}});
}

TEST_CASE("extract_spans closes spans at type changes", "[tags]") {
  // adjacent B tags give adjacent spans
  CHECK(extract_spans(parse_tags({"B-PER", "B-PER"}), SpanMode::Strict) ==
        std::vector<EntitySpan>{{0, 1, EntityType::PER},
                                {1, 2, EntityType::PER}});
  // a span reaching the end of the sequence is closed
  CHECK(extract_spans(parse_tags({"O", "B-ORG", "I-ORG"}), SpanMode::Strict) ==
        std::vector<EntitySpan>{{1, 3, EntityType::ORG}});
  CHECK(extract_spans(std::vector<Tag>{}, SpanMode::Lenient).empty());
}

TEST_CASE("strict spans are a subset of lenient spans", "[tags]") {
  std::mt19937 rng(4242);
  for (int iter = 0; iter < 500; ++iter) {
    const auto tags = random_tags(rng, rng() % 16);
    const auto strict = extract_spans(tags, SpanMode::Strict);
    const auto lenient = extract_spans(tags, SpanMode::Lenient);
    for (const auto& s : strict)
      CHECK(std::find(lenient.begin(), lenient.end(), s) != lenient.end());
    CHECK(strict.size() <= lenient.size());
  }
}

TEST_CASE("validate_bio reports dangling I tags", "[tags]") {
  CHECK(validate_bio(parse_tags({"B-ORG", "I-ORG"})).empty());

  const auto v = validate_bio(parse_tags({"O", "I-PER"}));
  REQUIRE(v.size() == 1);
  CHECK(v[0].position == 1);

  // an I run after a type switch is one violation, at its first tag
  const auto w = validate_bio(parse_tags({"B-PER", "I-LOC", "I-LOC"}));
  REQUIRE(w.size() == 1);
  CHECK(w[0].position == 1);

  CHECK(validate_bio(std::vector<Tag>{}).empty());
}
