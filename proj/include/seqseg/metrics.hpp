#pragma once

#include <cstdio>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "seqseg/corpus.hpp"
#include "seqseg/error.hpp"

namespace seqseg {

struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
};

enum class SegmentLevel { Word, Morph };

namespace detail {

inline PrfResult finish_prf(long long tp, long long fp, long long fn) {
  PrfResult out;
  out.tp = tp;
  out.fp = fp;
  out.fn = fn;
  out.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

inline void check_aligned(std::span<const Sentence> gold, std::span<const Sentence> pred) {
  if (gold.size() != pred.size()) {
    fail(ErrorCode::AlignmentError, "gold and prediction sentence counts differ");
  }
  for (std::size_t n = 0; n < gold.size(); ++n) {
    if (gold[n].units != pred[n].units) {
      fail(ErrorCode::AlignmentError,
           "unit streams differ at sentence " + std::to_string(n + 1));
    }
  }
}

// Word spans, or (word span, morph span) keys at morph level. A sentence
// without morph annotation counts each word as a single morph.
using SegmentKey = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>;

inline std::set<SegmentKey> segment_keys(const Sentence& s, SegmentLevel level) {
  std::set<SegmentKey> keys;
  for (std::size_t w = 0; w < s.words.size(); ++w) {
    const Span& word = s.words[w];
    if (level == SegmentLevel::Word) {
      keys.emplace(word.begin, word.end, word.begin, word.end);
    } else if (s.morphs.has_value()) {
      for (const Span& m : (*s.morphs)[w]) keys.emplace(word.begin, word.end, m.begin, m.end);
    } else {
      keys.emplace(word.begin, word.end, word.begin, word.end);
    }
  }
  return keys;
}

}  // namespace detail

// Micro-averaged precision/recall/F1 over exact segment spans. A predicted
// segment is correct iff the same unit span (within the same word, at morph
// level) appears in the gold segmentation.
inline PrfResult segment_prf(std::span<const Sentence> gold, std::span<const Sentence> pred,
                             SegmentLevel level) {
  detail::check_aligned(gold, pred);
  long long tp = 0, fp = 0, fn = 0;
  for (std::size_t n = 0; n < gold.size(); ++n) {
    const auto gold_keys = detail::segment_keys(gold[n], level);
    const auto pred_keys = detail::segment_keys(pred[n], level);
    for (const auto& key : pred_keys) {
      if (gold_keys.contains(key)) ++tp;
      else ++fp;
    }
    for (const auto& key : gold_keys) {
      if (!pred_keys.contains(key)) ++fn;
    }
  }
  return detail::finish_prf(tp, fp, fn);
}

// Picks the stem among a word's morph spans; affixes are the morphs before
// (prefixes) and after (suffixes) the stem. The default takes the longest
// morph, leftmost on ties.
using StemSelector = std::function<std::size_t(std::span<const Span>)>;

inline std::size_t longest_leftmost_stem(std::span<const Span> morphs) {
  std::size_t stem = 0;
  for (std::size_t m = 1; m < morphs.size(); ++m) {
    if (morphs[m].size() > morphs[stem].size()) stem = m;
  }
  return stem;
}

namespace detail {

inline std::set<SegmentKey> affix_keys(const Sentence& s, const StemSelector& select_stem) {
  std::set<SegmentKey> keys;
  if (!s.morphs.has_value()) return keys;
  for (std::size_t w = 0; w < s.words.size(); ++w) {
    const std::vector<Span>& morphs = (*s.morphs)[w];
    if (morphs.size() < 2) continue;  // a single-morph word has no affixes
    const std::size_t stem = select_stem(morphs);
    for (std::size_t m = 0; m < morphs.size(); ++m) {
      if (m == stem) continue;
      keys.emplace(s.words[w].begin, s.words[w].end, morphs[m].begin, morphs[m].end);
    }
  }
  return keys;
}

}  // namespace detail

// Precision/recall/F1 over identified prefixes and suffixes only: an affix
// is correct iff gold and prediction agree on its character span within the
// same word. Micro-averaged over the corpus.
inline PrfResult affix_prf(std::span<const Sentence> gold, std::span<const Sentence> pred,
                           const StemSelector& select_stem = longest_leftmost_stem) {
  detail::check_aligned(gold, pred);
  long long tp = 0, fp = 0, fn = 0;
  for (std::size_t n = 0; n < gold.size(); ++n) {
    const auto gold_keys = detail::affix_keys(gold[n], select_stem);
    const auto pred_keys = detail::affix_keys(pred[n], select_stem);
    for (const auto& key : pred_keys) {
      if (gold_keys.contains(key)) ++tp;
      else ++fp;
    }
    for (const auto& key : gold_keys) {
      if (!pred_keys.contains(key)) ++fn;
    }
  }
  return detail::finish_prf(tp, fp, fn);
}

// Scorer output line, 4 decimal places.
inline std::string format_prf(const PrfResult& r) {
  char line[64];
  std::snprintf(line, sizeof(line), "P %.4f R %.4f F %.4f", r.precision, r.recall, r.f1);
  return line;
}

}  // namespace seqseg
