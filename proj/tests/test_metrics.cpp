#include <catch2/catch_amalgamated.hpp>

#include "seqseg/metrics.hpp"
#include "support/generators.hpp"

using namespace seqseg;

namespace {

std::vector<Sentence> one(const Sentence& s) { return {s}; }

}  // namespace

TEST_CASE("perfect prediction scores 1 everywhere") {
  Sentence gold = parse_word_line("ab c de", false);
  PrfResult r = segment_prf(one(gold), one(gold), SegmentLevel::Word);
  REQUIRE(r.precision == 1.0);
  REQUIRE(r.recall == 1.0);
  REQUIRE(r.f1 == 1.0);
}

TEST_CASE("the ab-c versus a-b-c hand case") {
  Sentence gold = parse_word_line("ab c", false);
  Sentence pred = parse_word_line("a b c", false);
  PrfResult r = segment_prf(one(gold), one(pred), SegmentLevel::Word);
  REQUIRE(r.tp == 1);
  REQUIRE(r.fp == 2);
  REQUIRE(r.fn == 1);
  REQUIRE_THAT(r.precision, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
  REQUIRE_THAT(r.recall, Catch::Matchers::WithinAbs(0.5, 1e-12));
  REQUIRE_THAT(r.f1, Catch::Matchers::WithinAbs(0.4, 1e-12));
}

TEST_CASE("empty corpora score zero by convention") {
  PrfResult r = segment_prf({}, {}, SegmentLevel::Word);
  REQUIRE(r.precision == 0.0);
  REQUIRE(r.recall == 0.0);
  REQUIRE(r.f1 == 0.0);
}

TEST_CASE("mismatched unit streams raise AlignmentError") {
  Sentence gold = parse_word_line("ab c", false);
  Sentence pred = parse_word_line("ab d", false);
  REQUIRE_THROWS_AS(segment_prf(one(gold), one(pred), SegmentLevel::Word), Error);
  REQUIRE_THROWS_AS(segment_prf(one(gold), {}, SegmentLevel::Word), Error);
}

TEST_CASE("swapping gold and prediction swaps precision and recall") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Sentence a = test::random_sentence(rng, 30, false);
    Sentence b = a;
    b.words.clear();
    std::size_t begin = 0;
    while (begin < b.units.size()) {
      std::size_t len = 1 + rng.below(std::min<std::size_t>(3, b.units.size() - begin));
      b.words.push_back({begin, begin + len});
      begin += len;
    }
    PrfResult ab = segment_prf(one(a), one(b), SegmentLevel::Word);
    PrfResult ba = segment_prf(one(b), one(a), SegmentLevel::Word);
    REQUIRE(ab.precision == ba.recall);
    REQUIRE(ab.recall == ba.precision);
    REQUIRE_THAT(ab.f1, Catch::Matchers::WithinAbs(ba.f1, 1e-12));
    REQUIRE(ab.precision >= 0.0);
    REQUIRE(ab.precision <= 1.0);
    REQUIRE(ab.f1 <= 1.0);
    if (ab.tp == 0) REQUIRE(ab.f1 == 0.0);
  }
}

TEST_CASE("correcting one word never decreases F1") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Sentence gold = test::random_sentence(rng, 30, false);
    // Corrupt: re-split every word into single units.
    Sentence corrupted = gold;
    corrupted.words.clear();
    for (std::size_t i = 0; i < corrupted.units.size(); ++i) {
      corrupted.words.push_back({i, i + 1});
    }
    // Restore one multi-unit gold word exactly.
    const Span* restore = nullptr;
    for (const Span& w : gold.words) {
      if (w.size() > 1) {
        restore = &w;
        break;
      }
    }
    if (restore == nullptr) continue;
    Sentence improved;
    improved.units = gold.units;
    for (std::size_t i = 0; i < improved.units.size();) {
      if (i == restore->begin) {
        improved.words.push_back(*restore);
        i = restore->end;
      } else {
        improved.words.push_back({i, i + 1});
        ++i;
      }
    }
    const double before = segment_prf(one(gold), one(corrupted), SegmentLevel::Word).f1;
    const double after = segment_prf(one(gold), one(improved), SegmentLevel::Word).f1;
    REQUIRE(after >= before);
  }
}

TEST_CASE("morph level equals word level when every word is a single morph") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Sentence gold = test::random_sentence(rng, 25, false);
    Sentence pred = test::random_sentence(rng, 25, false);
    pred.units = gold.units;
    pred.words.clear();
    std::size_t begin = 0;
    while (begin < pred.units.size()) {
      std::size_t len = 1 + rng.below(std::min<std::size_t>(4, pred.units.size() - begin));
      pred.words.push_back({begin, begin + len});
      begin += len;
    }
    auto single_morphs = [](Sentence& s) {
      s.morphs.emplace();
      for (const Span& w : s.words) s.morphs->push_back({w});
    };
    Sentence gold_m = gold, pred_m = pred;
    single_morphs(gold_m);
    single_morphs(pred_m);
    PrfResult word = segment_prf(one(gold), one(pred), SegmentLevel::Word);
    PrfResult morph = segment_prf(one(gold_m), one(pred_m), SegmentLevel::Morph);
    REQUIRE(word.tp == morph.tp);
    REQUIRE(word.fp == morph.fp);
    REQUIRE(word.fn == morph.fn);
  }
}

TEST_CASE("the kremppoja affix hand case") {
  Sentence gold = parse_morpheme_line("kremppo//j//a");
  Sentence pred = parse_morpheme_line("kremppoj//a");
  PrfResult r = affix_prf(one(gold), one(pred));
  // Gold affixes j@(7,8) and a@(8,9); predicted affix a@(8,9) only.
  REQUIRE(r.tp == 1);
  REQUIRE(r.fp == 0);
  REQUIRE(r.fn == 1);
  REQUIRE_THAT(r.precision, Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(r.recall, Catch::Matchers::WithinAbs(0.5, 1e-12));
  REQUIRE_THAT(r.f1, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-12));
}

TEST_CASE("affix_prf is perfect on an identical morph sentence") {
  Sentence s = parse_morpheme_line("elämä tu//o kremppo//j//a mukana//an .");
  PrfResult r = affix_prf(one(s), one(s));
  REQUIRE(r.precision == 1.0);
  REQUIRE(r.recall == 1.0);
  REQUIRE(r.f1 == 1.0);
  REQUIRE(r.tp > 0);
}

TEST_CASE("single-morph words contribute no affixes") {
  Sentence gold = parse_morpheme_line("abc de");
  Sentence pred = parse_morpheme_line("abc de");
  PrfResult r = affix_prf(one(gold), one(pred));
  REQUIRE(r.tp == 0);
  REQUIRE(r.fp == 0);
  REQUIRE(r.fn == 0);
  REQUIRE(r.f1 == 0.0);
}

TEST_CASE("a prediction with no affixes has zero precision by convention") {
  Sentence gold = parse_morpheme_line("kremppo//j//a");
  Sentence pred = parse_morpheme_line("kremppoja");
  PrfResult r = affix_prf(one(gold), one(pred));
  REQUIRE(r.tp == 0);
  REQUIRE(r.precision == 0.0);
  REQUIRE(r.recall == 0.0);
  REQUIRE(r.f1 == 0.0);
}

TEST_CASE("an alternative stem rule can be swapped in") {
  Sentence gold = parse_morpheme_line("ab//cd");
  Sentence pred = parse_morpheme_line("ab//cd");
  // Longest-leftmost picks "ab" as stem (tie), so "cd" is the suffix.
  PrfResult base = affix_prf(one(gold), one(pred));
  REQUIRE(base.tp == 1);
  // A rightmost-stem rule makes "ab" the prefix instead; still a perfect match.
  StemSelector rightmost = [](std::span<const Span> morphs) { return morphs.size() - 1; };
  PrfResult alt = affix_prf(one(gold), one(pred), rightmost);
  REQUIRE(alt.tp == 1);
}

TEST_CASE("format_prf prints four decimals") {
  Sentence gold = parse_word_line("ab c", false);
  Sentence pred = parse_word_line("a b c", false);
  PrfResult r = segment_prf(one(gold), one(pred), SegmentLevel::Word);
  REQUIRE(format_prf(r) == "P 0.3333 R 0.5000 F 0.4000");
}
