// BIO tag algebra: the WikiANN tag alphabet (B/I x PER/ORG/LOC plus O),
// projection of word-level tags onto sub-word units, span extraction and
// sequence validation.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phoner {

enum class EntityType { PER = 0, ORG = 1, LOC = 2 };

inline std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::PER: return "PER";
    case EntityType::ORG: return "ORG";
    case EntityType::LOC: return "LOC";
  }
  throw std::logic_error("bad EntityType");
}

struct Tag {
  enum class Kind { B, I, O };

  Kind kind = Kind::O;
  EntityType type = EntityType::PER;  // meaningful iff kind != O

  static Tag O() { return Tag{Kind::O, EntityType::PER}; }
  static Tag B(EntityType t) { return Tag{Kind::B, t}; }
  static Tag I(EntityType t) { return Tag{Kind::I, t}; }

  bool is_o() const { return kind == Kind::O; }

  friend bool operator==(const Tag& a, const Tag& b) {
    if (a.kind != b.kind) return false;
    return a.kind == Kind::O || a.type == b.type;
  }

  std::string str() const {
    if (kind == Kind::O) return "O";
    std::string s(kind == Kind::B ? "B-" : "I-");
    s += to_string(type);
    return s;
  }

  /// Parses the WikiANN surface syntax: "O", "B-PER", "I-LOC", ...
  static Tag parse(std::string_view s) {
    if (s == "O") return O();
    if (s.size() == 5 && (s[0] == 'B' || s[0] == 'I') && s[1] == '-') {
      const std::string_view ty = s.substr(2);
      std::optional<EntityType> t;
      if (ty == "PER") t = EntityType::PER;
      else if (ty == "ORG") t = EntityType::ORG;
      else if (ty == "LOC") t = EntityType::LOC;
      if (t) return s[0] == 'B' ? B(*t) : I(*t);
    }
    throw std::invalid_argument("unparseable tag '" + std::string(s) + "'");
  }
};

struct WordLabeledSentence {
  std::vector<std::string> tokens;
  std::vector<Tag> tags;
};

struct SegmentLabeledSentence {
  std::vector<std::string> segments;
  std::vector<Tag> tags;
  std::vector<std::size_t> word_boundaries;  // segment count per word
};

/// Projects word-level tags onto sub-word units. A word tagged B-X puts
/// B-X on its first unit and I-X on the rest; I-X and O words replicate
/// their tag onto every unit.
inline std::vector<Tag> project_tags(std::span<const Tag> word_tags,
                                     std::span<const std::size_t> unit_counts) {
  if (word_tags.size() != unit_counts.size())
    throw std::invalid_argument("project_tags: tag/count length mismatch");
  std::vector<Tag> out;
  for (std::size_t w = 0; w < word_tags.size(); ++w) {
    const std::size_t n = unit_counts[w];
    if (n == 0)
      throw std::invalid_argument("project_tags: word " + std::to_string(w) +
                                  " has zero units (empty transliteration?)");
    const Tag t = word_tags[w];
    out.push_back(t);
    const Tag rest = (t.kind == Tag::Kind::B) ? Tag::I(t.type) : t;
    for (std::size_t k = 1; k < n; ++k) out.push_back(rest);
  }
  return out;
}

inline std::vector<Tag> project_tags(const std::vector<Tag>& word_tags,
                                     const std::vector<std::size_t>& counts) {
  return project_tags(std::span<const Tag>(word_tags),
                      std::span<const std::size_t>(counts));
}

struct EntitySpan {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  EntityType type = EntityType::PER;

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
  friend bool operator<(const EntitySpan& a, const EntitySpan& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return static_cast<int>(a.type) < static_cast<int>(b.type);
  }
};

enum class SpanMode { Strict, Lenient };

struct BioViolation {
  std::size_t position = 0;
  std::string description;
};

/// Extracts maximal, non-overlapping entity spans from a tag sequence.
/// Strict mode opens spans only at B-X and records every dangling I-X as
/// a violation; lenient mode (conlleval-compatible) also lets a dangling
/// I-X open a span.
inline std::vector<EntitySpan> extract_spans(
    std::span<const Tag> tags, SpanMode mode,
    std::vector<BioViolation>* violations = nullptr) {
  std::vector<EntitySpan> spans;
  std::optional<EntityType> open;
  std::size_t open_start = 0;
  auto close = [&](std::size_t end) {
    if (open) spans.push_back({open_start, end, *open});
    open.reset();
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Tag t = tags[i];
    if (t.kind == Tag::Kind::O) {
      close(i);
      continue;
    }
    if (t.kind == Tag::Kind::B) {
      close(i);
      open = t.type;
      open_start = i;
      continue;
    }
    // I-X extends any run of the same type, including an unopened one
    // (a dangling-I run counts as a single violation, at its first tag).
    const bool prev_same = i > 0 && tags[i - 1].kind != Tag::Kind::O &&
                           tags[i - 1].type == t.type;
    if (prev_same) continue;
    if (violations)
      violations->push_back({i, "I-" + std::string(to_string(t.type)) +
                                    " without preceding B-/I- of the same type"});
    close(i);
    if (mode == SpanMode::Lenient) {
      open = t.type;
      open_start = i;
    }
  }
  close(tags.size());
  return spans;
}

inline std::vector<EntitySpan> extract_spans(
    const std::vector<Tag>& tags, SpanMode mode,
    std::vector<BioViolation>* violations = nullptr) {
  return extract_spans(std::span<const Tag>(tags), mode, violations);
}

/// Reports every I-X not preceded by a B-X or I-X of the same type.
/// An empty result means the sequence is strict-BIO well-formed.
inline std::vector<BioViolation> validate_bio(std::span<const Tag> tags) {
  std::vector<BioViolation> violations;
  extract_spans(tags, SpanMode::Strict, &violations);
  return violations;
}

inline std::vector<BioViolation> validate_bio(const std::vector<Tag>& tags) {
  return validate_bio(std::span<const Tag>(tags));
}

}  // namespace phoner
