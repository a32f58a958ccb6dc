#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>
#include <vector>

#include "phoner/segment.hpp"

using namespace phoner;

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += p;
  return out;
}

}  // namespace

TEST_CASE("benjamin comprises nine segments", "[segment]") {
  const SegmentedWord w = segment_ipa("bɛnd͡ʒəmən");
  const std::vector<std::string> expected = {"b", "ɛ", "n", "d͡", "ʒ",
                                             "ə", "m", "ə", "n"};
  CHECK(w.segments == expected);
  CHECK(w.segments.size() == 9);
}

TEST_CASE("empty input yields no segments", "[segment]") {
  CHECK(segment_ipa("").segments.empty());
  SegmenterConfig joined;
  joined.join_tie_bar = true;
  CHECK(segment_ipa(joined, "").segments.empty());
}

TEST_CASE("tie bar join merges affricates", "[segment]") {
  SegmenterConfig cfg;
  cfg.join_tie_bar = true;
  const SegmentedWord w = segment_ipa(cfg, "t͡ʃina");
  const std::vector<std::string> expected = {"t͡ʃ", "i", "n", "a"};
  CHECK(w.segments == expected);

  // without the join, the tie bar attaches to the left base only
  const SegmentedWord split = segment_ipa("t͡ʃina");
  CHECK(split.segments.size() == 5);
  CHECK(split.segments[0] == "t͡");
  CHECK(split.segments[1] == "ʃ");
}

TEST_CASE("combining marks attach to the preceding base", "[segment]") {
  CHECK(segment_ipa("ẽ").segments ==
        std::vector<std::string>{"ẽ"});  // nasalized e
  // a joined base keeps its own trailing marks
  SegmenterConfig cfg;
  cfg.join_tie_bar = true;
  CHECK(segment_ipa(cfg, "t͡ʃ̰a").segments.size() == 2);
}

TEST_CASE("modifier letters attach per configuration", "[segment]") {
  CHECK(segment_ipa("tʰaː").segments ==
        std::vector<std::string>{"tʰ", "aː"});
  CHECK(segment_ipa("kʷi").segments == std::vector<std::string>{"kʷ", "i"});

  SegmenterConfig bare;
  bare.attach_modifiers.clear();
  CHECK(segment_ipa(bare, "tʰa").segments ==
        std::vector<std::string>{"t", "ʰ", "a"});
}

TEST_CASE("leading combining mark is an error", "[segment]") {
  CHECK_THROWS_WITH(segment_ipa("͡a"),
                    Catch::Matchers::ContainsSubstring("position 0"));
  CHECK_THROWS_AS(segment_ipa("̃"), std::invalid_argument);
  // a leading modifier letter is a base, not an error
  CHECK(segment_ipa("ʰa").segments.size() == 2);
}

TEST_CASE("segmentation is lossless on random IPA strings", "[segment]") {
  const std::vector<char32_t> bases = {U'b', U'ɛ', U'n', U'd',  U'ʒ', U'ə',
                                       U'm', U't', U'ʃ', U'i',  U'a', U'k',
                                       U'o', U'u', U'ŋ', U'ʁ',  U'q', U'χ'};
  const std::vector<char32_t> marks = {U'͡', U'̃', U'̰',
                                       U'̯'};
  const std::vector<char32_t> mods = {U'ʰ', U'ʷ', U'ʲ', U'ː'};
  std::mt19937 rng(20240902);
  SegmenterConfig plain;
  SegmenterConfig joined;
  joined.join_tie_bar = true;
  for (int iter = 0; iter < 10000; ++iter) {
    std::u32string s;
    const std::size_t n = 1 + rng() % 8;
    for (std::size_t k = 0; k < n; ++k) {
      s += bases[rng() % bases.size()];
      while (rng() % 4 == 0) s += marks[rng() % marks.size()];
      while (rng() % 6 == 0) s += mods[rng() % mods.size()];
    }
    const std::string ipa = utf8_encode(s);
    const SegmenterConfig& cfg = (iter % 2 == 0) ? plain : joined;
    const SegmentedWord w = segment_ipa(cfg, ipa);
    CHECK(join(w.segments) == ipa);
    for (const auto& seg : w.segments) CHECK(!seg.empty());
  }
}

TEST_CASE("appending a mark never changes the segment count", "[segment]") {
  const std::vector<char32_t> bases = {U'b', U'ɛ', U'n', U'a', U'ʃ'};
  const std::vector<char32_t> marks = {U'̃', U'̰', U'̯'};
  std::mt19937 rng(3);
  for (int iter = 0; iter < 500; ++iter) {
    std::u32string s;
    for (std::size_t k = 0, n = 1 + rng() % 6; k < n; ++k) {
      s += bases[rng() % bases.size()];
      if (rng() % 3 == 0) s += marks[rng() % marks.size()];
    }
    const std::size_t before = segment_ipa(utf8_encode(s)).segments.size();
    // insert a combining mark right after a random base character
    std::vector<std::size_t> base_positions;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (!is_combining_mark(s[i])) base_positions.push_back(i);
    const std::size_t at = base_positions[rng() % base_positions.size()];
    s.insert(s.begin() + static_cast<long>(at) + 1, marks[rng() % marks.size()]);
    CHECK(segment_ipa(utf8_encode(s)).segments.size() == before);
  }
}

TEST_CASE("segmentation is deterministic", "[segment]") {
  const std::string ipa = "bɛnd͡ʒəmənʰː";
  const auto a = segment_ipa(ipa);
  const auto b = segment_ipa(ipa);
  CHECK(a.segments == b.segments);
}
