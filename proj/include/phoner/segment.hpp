// IPA phoneme segmentation: one base character plus everything that
// binds to it (combining marks and configured modifier letters).
#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "phoner/unicode.hpp"
#include "phoner/utf8.hpp"

namespace phoner {

struct SegmenterConfig {
  // Modifier letters that bind to the preceding base. Must not contain
  // ordinary base letters.
  std::set<char32_t> attach_modifiers = default_attach_modifiers();
  // When true, a tie bar additionally pulls the following base (and its
  // trailing marks) into the same segment, so affricates like t͡ʃ stay
  // one unit. Off by default: targets count t͡ and ʃ separately.
  bool join_tie_bar = false;
};

struct SegmentedWord {
  std::string ipa;                    // the input, unmodified
  std::vector<std::string> segments;  // concatenation equals ipa
};

/// Splits an IPA string (no whitespace) into phoneme segments. Each
/// segment is a base character followed by its combining marks and any
/// attached modifier letters.
inline SegmentedWord segment_ipa(const SegmenterConfig& config,
                                 std::string_view ipa) {
  SegmentedWord out;
  out.ipa = std::string(ipa);
  const std::u32string cps = utf8_decode(ipa);
  if (cps.empty()) return out;
  if (is_combining_mark(cps[0]))
    throw std::invalid_argument("dangling combining mark at position 0");

  std::size_t i = 0;
  const std::size_t n = cps.size();
  while (i < n) {
    const std::size_t start = i;
    ++i;  // base character
    while (i < n) {
      if (is_combining_mark(cps[i])) {
        const bool tie = cps[i] == kTieBar;
        ++i;
        if (tie && config.join_tie_bar && i < n && !is_combining_mark(cps[i]))
          ++i;  // pull the joined base; its marks attach on the next loop
        continue;
      }
      if (config.attach_modifiers.count(cps[i])) {
        ++i;
        continue;
      }
      break;
    }
    out.segments.push_back(
        utf8_encode(std::u32string(cps.begin() + start, cps.begin() + i)));
  }
  return out;
}

inline SegmentedWord segment_ipa(std::string_view ipa) {
  return segment_ipa(SegmenterConfig{}, ipa);
}

}  // namespace phoner
