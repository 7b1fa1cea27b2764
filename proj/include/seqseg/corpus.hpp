#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqseg/error.hpp"

namespace seqseg {

// Half-open index range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

// A segmented sentence. `units` are the base symbols (Unicode code points,
// or space-delimited syllables in unit mode). `words` partition the units;
// `morphs`, when present, holds one span list per word that partitions that
// word. All spans are absolute unit indices.
struct Sentence {
  std::vector<std::string> units;
  std::vector<Span> words;
  std::optional<std::vector<std::vector<Span>>> morphs;

  bool operator==(const Sentence&) const = default;
};

enum class TagKind { BIES, BIESX };

struct TagScheme {
  TagKind kind = TagKind::BIES;

  static constexpr int kB = 0;
  static constexpr int kI = 1;
  static constexpr int kE = 2;
  static constexpr int kS = 3;
  static constexpr int kX = 4;

  int size() const { return kind == TagKind::BIES ? 4 : 5; }
  const char* name() const { return kind == TagKind::BIES ? "bies" : "biesx"; }
  bool operator==(const TagScheme&) const = default;
};

struct TagSequence {
  std::vector<int> tags;
  TagScheme scheme;

  std::size_t size() const { return tags.size(); }
  bool operator==(const TagSequence&) const = default;
};

// The stream slot standing in for an inter-word boundary in BIESX mode.
// It is an ordinary unit as far as features are concerned.
inline const std::string kBoundaryUnit = " ";

inline bool is_blank(std::string_view line) {
  for (char c : line) {
    if (c != ' ' && c != '\t' && c != '\r' && c != '\n') return false;
  }
  return true;
}

inline std::vector<std::string> split(std::string_view s, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t hit = s.find(sep, pos);
    if (hit == std::string_view::npos) {
      out.emplace_back(s.substr(pos));
      return out;
    }
    out.emplace_back(s.substr(pos, hit - pos));
    pos = hit + sep.size();
  }
}

// Splits UTF-8 text into one string per Unicode scalar value. Bytes that do
// not form a valid sequence are kept as single-byte units so the function is
// total on arbitrary input.
inline std::vector<std::string> utf8_units(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (b >= 0xF0) len = 4;
    else if (b >= 0xE0) len = 3;
    else if (b >= 0xC0) len = 2;
    if (i + len > text.size()) {
      len = 1;
    } else {
      for (std::size_t k = 1; k < len; ++k) {
        if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
          len = 1;
          break;
        }
      }
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

// Word-segmented line: words separated by single spaces; in unit mode the
// units of a word are joined by "_", otherwise a word is a run of code
// points.
inline Sentence parse_word_line(std::string_view line, bool unit_mode) {
  if (is_blank(line)) fail(ErrorCode::EmptyLine, "blank input line");
  Sentence s;
  for (const std::string& word : split(line, " ")) {
    if (word.empty()) {
      fail(ErrorCode::MalformedWord, "empty word in line '" + std::string(line) + "'");
    }
    std::vector<std::string> units =
        unit_mode ? split(word, "_") : utf8_units(word);
    for (const std::string& u : units) {
      if (u.empty()) {
        fail(ErrorCode::MalformedWord, "empty unit in word '" + word + "'");
      }
    }
    const std::size_t begin = s.units.size();
    s.units.insert(s.units.end(), units.begin(), units.end());
    s.words.push_back({begin, s.units.size()});
  }
  return s;
}

// Morph-segmented line: words separated by spaces, morphs inside a word
// joined by "//". A word without the separator is one morph. Units are code
// points.
inline Sentence parse_morpheme_line(std::string_view line) {
  if (is_blank(line)) fail(ErrorCode::EmptyLine, "blank input line");
  Sentence s;
  s.morphs.emplace();
  for (const std::string& word : split(line, " ")) {
    if (word.empty()) {
      fail(ErrorCode::MalformedWord, "empty word in line '" + std::string(line) + "'");
    }
    const std::size_t word_begin = s.units.size();
    std::vector<Span> morph_spans;
    for (const std::string& morph : split(word, "//")) {
      if (morph.empty()) {
        fail(ErrorCode::MalformedMorpheme, "empty morph in word '" + word + "'");
      }
      std::vector<std::string> units = utf8_units(morph);
      const std::size_t begin = s.units.size();
      s.units.insert(s.units.end(), units.begin(), units.end());
      morph_spans.push_back({begin, s.units.size()});
    }
    s.words.push_back({word_begin, s.units.size()});
    s.morphs->push_back(std::move(morph_spans));
  }
  return s;
}

// The unit stream the model actually tags: the units themselves for BIES,
// and units with one boundary slot between consecutive words for BIESX.
inline std::vector<std::string> tagged_stream(const Sentence& s, TagScheme scheme) {
  if (scheme.kind == TagKind::BIES) return s.units;
  std::vector<std::string> out;
  out.reserve(s.units.size() + (s.words.empty() ? 0 : s.words.size() - 1));
  for (std::size_t w = 0; w < s.words.size(); ++w) {
    if (w > 0) out.push_back(kBoundaryUnit);
    for (std::size_t i = s.words[w].begin; i < s.words[w].end; ++i) {
      out.push_back(s.units[i]);
    }
  }
  return out;
}

namespace detail {

inline void append_segment_tags(std::size_t n, std::vector<int>& tags) {
  if (n == 1) {
    tags.push_back(TagScheme::kS);
    return;
  }
  tags.push_back(TagScheme::kB);
  for (std::size_t k = 2; k < n; ++k) tags.push_back(TagScheme::kI);
  tags.push_back(TagScheme::kE);
}

}  // namespace detail

// Position tags over the tagged stream: segments of length one become S,
// longer ones B I..I E; in BIESX mode each inter-word slot becomes X.
inline TagSequence encode_tags(const Sentence& s, TagScheme scheme) {
  TagSequence t;
  t.scheme = scheme;
  if (scheme.kind == TagKind::BIES) {
    for (const Span& w : s.words) detail::append_segment_tags(w.size(), t.tags);
    return t;
  }
  if (!s.morphs.has_value()) {
    fail(ErrorCode::SchemeMismatch, "biesx tagging requires morph annotation");
  }
  for (std::size_t w = 0; w < s.words.size(); ++w) {
    if (w > 0) t.tags.push_back(TagScheme::kX);
    for (const Span& m : (*s.morphs)[w]) {
      detail::append_segment_tags(m.size(), t.tags);
    }
  }
  return t;
}

// Recovers a segmentation from predicted tags. The repair rule makes the
// mapping total: B or S always opens a segment, I or E with no open segment
// opens one, X always closes the current word. Units at X positions are
// boundary slots and are dropped from the result.
inline Sentence decode_tags(const std::vector<std::string>& units, const TagSequence& t) {
  if (units.size() != t.tags.size()) {
    fail(ErrorCode::LengthMismatch,
         "tag/unit length mismatch: " + std::to_string(t.tags.size()) + " vs " +
             std::to_string(units.size()));
  }
  Sentence out;
  std::vector<std::vector<Span>> groups(1);
  bool open = false;

  auto close_segment = [&] { open = false; };
  auto close_word = [&] {
    close_segment();
    if (!groups.back().empty()) groups.emplace_back();
  };

  for (std::size_t i = 0; i < units.size(); ++i) {
    const int tag = t.tags[i];
    if (tag == TagScheme::kX) {
      close_word();
      continue;
    }
    out.units.push_back(units[i]);
    const std::size_t pos = out.units.size() - 1;
    switch (tag) {
      case TagScheme::kB:
        close_segment();
        groups.back().push_back({pos, pos + 1});
        open = true;
        break;
      case TagScheme::kS:
        close_segment();
        groups.back().push_back({pos, pos + 1});
        break;
      case TagScheme::kI:
        if (open) {
          groups.back().back().end = pos + 1;
        } else {
          groups.back().push_back({pos, pos + 1});
          open = true;
        }
        break;
      case TagScheme::kE:
        if (open) {
          groups.back().back().end = pos + 1;
        } else {
          groups.back().push_back({pos, pos + 1});
        }
        close_segment();
        break;
      default:
        fail(ErrorCode::IndexOutOfRange, "tag index " + std::to_string(tag));
    }
  }
  if (groups.back().empty()) groups.pop_back();

  if (t.scheme.kind == TagKind::BIES) {
    // Every segment is a word.
    for (const auto& group : groups) {
      for (const Span& seg : group) out.words.push_back(seg);
    }
  } else {
    out.morphs.emplace();
    for (auto& group : groups) {
      out.words.push_back({group.front().begin, group.back().end});
      out.morphs->push_back(std::move(group));
    }
  }
  return out;
}

// Offsets of the length-limited fragments covering a stream of n positions.
inline std::vector<Span> chop_spans(std::size_t n, std::size_t limit) {
  if (limit < 1) fail(ErrorCode::EmptyInput, "chop limit must be >= 1");
  if (n == 0) fail(ErrorCode::EmptyInput, "cannot chop an empty stream");
  std::vector<Span> out;
  for (std::size_t begin = 0; begin < n; begin += limit) {
    out.push_back({begin, std::min(begin + limit, n)});
  }
  return out;
}

inline std::vector<std::vector<std::string>> chop(const std::vector<std::string>& units,
                                                  std::size_t limit = 300) {
  std::vector<std::vector<std::string>> out;
  for (const Span& span : chop_spans(units.size(), limit)) {
    out.emplace_back(units.begin() + static_cast<std::ptrdiff_t>(span.begin),
                     units.begin() + static_cast<std::ptrdiff_t>(span.end));
  }
  return out;
}

inline TagSequence stitch(const std::vector<TagSequence>& fragments) {
  if (fragments.empty()) fail(ErrorCode::EmptyInput, "no fragments to stitch");
  TagSequence out;
  out.scheme = fragments.front().scheme;
  for (const TagSequence& f : fragments) {
    if (f.scheme != out.scheme) {
      fail(ErrorCode::SchemeMismatch, "fragments use different tag schemes");
    }
    out.tags.insert(out.tags.end(), f.tags.begin(), f.tags.end());
  }
  return out;
}

// Reconciles a predicted BIESX tag stream with the boundary slots known from
// the input: boundary positions are forced to X, and a stray X at a unit
// position becomes E so the decoded units always match the input words.
// BIES sequences pass through unchanged.
inline TagSequence snap_tags_to_boundaries(const std::vector<bool>& is_boundary,
                                           TagSequence t) {
  if (t.scheme.kind == TagKind::BIES) return t;
  if (is_boundary.size() != t.tags.size()) {
    fail(ErrorCode::LengthMismatch, "boundary mask length mismatch");
  }
  for (std::size_t i = 0; i < t.tags.size(); ++i) {
    if (is_boundary[i]) {
      t.tags[i] = TagScheme::kX;
    } else if (t.tags[i] == TagScheme::kX) {
      t.tags[i] = TagScheme::kE;
    }
  }
  return t;
}

inline std::string tags_to_string(const TagSequence& t) {
  static constexpr char kLetters[] = {'B', 'I', 'E', 'S', 'X'};
  std::string out;
  out.reserve(t.tags.size());
  for (int tag : t.tags) {
    if (tag < 0 || tag > 4) fail(ErrorCode::IndexOutOfRange, "tag index out of range");
    out.push_back(kLetters[tag]);
  }
  return out;
}

inline TagSequence tags_from_string(std::string_view text, TagScheme scheme) {
  TagSequence t;
  t.scheme = scheme;
  for (char c : text) {
    switch (c) {
      case 'B': t.tags.push_back(TagScheme::kB); break;
      case 'I': t.tags.push_back(TagScheme::kI); break;
      case 'E': t.tags.push_back(TagScheme::kE); break;
      case 'S': t.tags.push_back(TagScheme::kS); break;
      case 'X': t.tags.push_back(TagScheme::kX); break;
      default: fail(ErrorCode::IndexOutOfRange, std::string("unknown tag letter '") + c + "'");
    }
    if (t.tags.back() >= scheme.size()) {
      fail(ErrorCode::SchemeMismatch, "tag X is not part of the BIES scheme");
    }
  }
  return t;
}

// Renders a Sentence back into the corpus text format.
inline std::string format_sentence(const Sentence& s, bool unit_mode) {
  std::string out;
  auto append_units = [&](const Span& span) {
    for (std::size_t i = span.begin; i < span.end; ++i) {
      if (unit_mode && i > span.begin) out += '_';
      out += s.units[i];
    }
  };
  for (std::size_t w = 0; w < s.words.size(); ++w) {
    if (w > 0) out += ' ';
    if (s.morphs.has_value()) {
      const auto& spans = (*s.morphs)[w];
      for (std::size_t m = 0; m < spans.size(); ++m) {
        if (m > 0) out += "//";
        append_units(spans[m]);
      }
    } else {
      append_units(s.words[w]);
    }
  }
  return out;
}

// Invariant check used by tests and fuzzing; throws on any violation.
inline void validate_sentence(const Sentence& s) {
  std::size_t cursor = 0;
  for (const Span& w : s.words) {
    if (w.begin != cursor || w.end <= w.begin || w.end > s.units.size()) {
      fail(ErrorCode::MalformedWord, "word spans must partition the units in order");
    }
    cursor = w.end;
  }
  if (cursor != s.units.size()) {
    fail(ErrorCode::MalformedWord, "word spans do not cover all units");
  }
  for (const std::string& u : s.units) {
    if (u.empty()) fail(ErrorCode::MalformedWord, "empty unit");
  }
  if (!s.morphs.has_value()) return;
  if (s.morphs->size() != s.words.size()) {
    fail(ErrorCode::MalformedMorpheme, "morph annotation must cover every word");
  }
  for (std::size_t w = 0; w < s.words.size(); ++w) {
    std::size_t pos = s.words[w].begin;
    for (const Span& m : (*s.morphs)[w]) {
      if (m.begin != pos || m.end <= m.begin || m.end > s.words[w].end) {
        fail(ErrorCode::MalformedMorpheme, "morph spans must partition their word");
      }
      pos = m.end;
    }
    if (pos != s.words[w].end) {
      fail(ErrorCode::MalformedMorpheme, "morph spans do not cover their word");
    }
  }
}

}  // namespace seqseg
