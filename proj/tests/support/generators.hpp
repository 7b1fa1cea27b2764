#pragma once

#include <string>
#include <vector>

#include "seqseg/corpus.hpp"
#include "seqseg/rng.hpp"

namespace seqseg::test {

// Alphabet with single- and multi-byte code points to exercise UTF-8 paths.
inline const std::vector<std::string>& unit_alphabet() {
  static const std::vector<std::string> alphabet = {
      "a", "b", "c", "d", "e", "ä", "ö", "夏", "天", "热"};
  return alphabet;
}

inline Sentence random_sentence(Rng& rng, std::size_t max_units, bool with_morphs) {
  Sentence s;
  const std::size_t n = 1 + rng.below(max_units);
  for (std::size_t i = 0; i < n; ++i) {
    s.units.push_back(unit_alphabet()[rng.below(unit_alphabet().size())]);
  }
  std::size_t begin = 0;
  while (begin < n) {
    std::size_t len = 1 + rng.below(std::min<std::size_t>(4, n - begin));
    s.words.push_back({begin, begin + len});
    begin += len;
  }
  if (with_morphs) {
    s.morphs.emplace();
    for (const Span& w : s.words) {
      std::vector<Span> spans;
      std::size_t pos = w.begin;
      while (pos < w.end) {
        std::size_t len = 1 + rng.below(std::min<std::size_t>(3, w.end - pos));
        spans.push_back({pos, pos + len});
        pos += len;
      }
      s.morphs->push_back(std::move(spans));
    }
  }
  return s;
}

}  // namespace seqseg::test
