#include <catch2/catch_amalgamated.hpp>

#include "seqseg/crf.hpp"
#include "seqseg/rng.hpp"
#include "support/enumeration.hpp"

using namespace seqseg;

namespace {

ScoreLattice zero_lattice(Eigen::Index length, Eigen::Index tags) {
  ScoreLattice lattice;
  lattice.emissions = Eigen::MatrixXd::Zero(length, tags);
  lattice.transitions = Eigen::MatrixXd::Zero(tags, tags);
  return lattice;
}

}  // namespace

TEST_CASE("log_partition of a uniform lattice is L log K") {
  REQUIRE_THAT(log_partition(zero_lattice(2, 2)),
               Catch::Matchers::WithinAbs(std::log(4.0), 1e-12));
  REQUIRE_THAT(log_partition(zero_lattice(5, 4)),
               Catch::Matchers::WithinAbs(5.0 * std::log(4.0), 1e-12));
}

TEST_CASE("log_partition dominates every single path score") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    ScoreLattice lattice = test::random_lattice(rng, 5, 5, false);
    const double log_z = log_partition(lattice);
    test::for_each_sequence(lattice.length(), lattice.tag_count(),
                            [&](const std::vector<int>& seq) {
                              REQUIRE(log_z >= test::raw_path_score(lattice, seq));
                            });
  }
}

TEST_CASE("nll of a uniform lattice is L log K") {
  ScoreLattice lattice = zero_lattice(3, 4);
  std::vector<int> gold = {0, 2, 1};
  REQUIRE_THAT(nll(lattice, gold), Catch::Matchers::WithinAbs(3.0 * std::log(4.0), 1e-12));
}

TEST_CASE("nll is strictly positive with finite scores") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    // With a single tag the gold path carries all probability mass, so the
    // strict bound only holds for K >= 2.
    ScoreLattice lattice = test::random_lattice(rng, 5, 4, false);
    while (lattice.tag_count() < 2) lattice = test::random_lattice(rng, 5, 4, false);
    std::vector<int> gold;
    for (Eigen::Index i = 0; i < lattice.length(); ++i) {
      gold.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(lattice.tag_count()))));
    }
    REQUIRE(nll(lattice, gold) > 0.0);
  }
}

TEST_CASE("nll of a dominant gold path obeys the margin bound") {
  // Gold emissions get +m; any other path loses at least m, so
  // nll < log(1 + (K^L - 1) * exp(-m)).
  const double margin = 5.0;
  const Eigen::Index length = 3, tags = 3;
  ScoreLattice lattice = zero_lattice(length, tags);
  std::vector<int> gold = {2, 0, 1};
  for (Eigen::Index i = 0; i < length; ++i) {
    lattice.emissions(i, gold[static_cast<std::size_t>(i)]) = margin;
  }
  const double bound = std::log(1.0 + (std::pow(3.0, 3) - 1.0) * std::exp(-margin));
  REQUIRE(viterbi_path(lattice) == gold);
  REQUIRE(nll(lattice, gold) < bound);
  REQUIRE(nll(lattice, gold) > 0.0);
}

TEST_CASE("viterbi with zero transitions is the per-position argmax") {
  ScoreLattice lattice = zero_lattice(3, 3);
  lattice.emissions << 0.0, 2.0, 1.0,  //
      5.0, 5.0, 4.0,                   // tie between tags 0 and 1: lowest wins
      -1.0, -2.0, -0.5;
  REQUIRE(viterbi_path(lattice) == std::vector<int>{1, 0, 2});
}

TEST_CASE("viterbi matches the hand-enumerated 2x2 example") {
  ScoreLattice lattice;
  lattice.emissions.resize(2, 2);
  lattice.emissions << 1.0, 0.0, 0.0, 0.5;
  lattice.transitions.resize(2, 2);
  lattice.transitions << 0.0, -2.0, 0.0, 0.0;
  const std::vector<int> path = viterbi_path(lattice);
  REQUIRE(path == std::vector<int>{0, 0});
  REQUIRE_THAT(path_score(lattice, path), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("forward and viterbi agree with enumeration on random lattices") {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const bool integer_scores = trial % 3 == 0;  // exercise exact ties
    ScoreLattice lattice = test::random_lattice(rng, 5, 5, integer_scores);
    REQUIRE_THAT(log_partition(lattice),
                 Catch::Matchers::WithinAbs(test::enum_log_partition(lattice), 1e-9));
    REQUIRE(viterbi_path(lattice) == test::enum_best_path(lattice));
  }
}

TEST_CASE("an all-zero lattice decodes to all lowest tags") {
  REQUIRE(viterbi_path(zero_lattice(4, 5)) == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("nll gradients equal enumeration marginals") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    ScoreLattice lattice = test::random_lattice(rng, 5, 4, false);
    std::vector<int> gold;
    for (Eigen::Index i = 0; i < lattice.length(); ++i) {
      gold.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(lattice.tag_count()))));
    }
    CrfGradients grads = nll_gradients(lattice, gold);
    REQUIRE_THAT(grads.nll, Catch::Matchers::WithinAbs(test::enum_nll(lattice, gold), 1e-9));

    Eigen::MatrixXd expected_emissions = test::enum_marginals(lattice);
    Eigen::MatrixXd expected_transitions = test::enum_pair_marginals(lattice);
    for (Eigen::Index i = 0; i < lattice.length(); ++i) {
      expected_emissions(i, gold[static_cast<std::size_t>(i)]) -= 1.0;
      if (i + 1 < lattice.length()) {
        expected_transitions(gold[static_cast<std::size_t>(i)],
                             gold[static_cast<std::size_t>(i + 1)]) -= 1.0;
      }
    }
    REQUIRE((grads.d_emissions - expected_emissions).cwiseAbs().maxCoeff() < 1e-9);
    REQUIRE((grads.d_transitions - expected_transitions).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("uniform lattice marginals are 1/K minus the gold indicator") {
  ScoreLattice lattice = zero_lattice(3, 4);
  std::vector<int> gold = {1, 3, 0};
  CrfGradients grads = nll_gradients(lattice, gold);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index k = 0; k < 4; ++k) {
      const double expected = 0.25 - (gold[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0);
      REQUIRE_THAT(grads.d_emissions(i, k), Catch::Matchers::WithinAbs(expected, 1e-12));
    }
  }
}

TEST_CASE("adding a constant to an emission row shifts log_partition and not viterbi") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    ScoreLattice lattice = test::random_lattice(rng, 5, 4, false);
    const double log_z = log_partition(lattice);
    const std::vector<int> path = viterbi_path(lattice);
    const auto row = static_cast<Eigen::Index>(
        rng.below(static_cast<std::size_t>(lattice.length())));
    const double c = rng.uniform(-3.0, 3.0);
    lattice.emissions.row(row).array() += c;
    REQUIRE_THAT(log_partition(lattice), Catch::Matchers::WithinAbs(log_z + c, 1e-9));
    REQUIRE(viterbi_path(lattice) == path);
  }
}

TEST_CASE("ensemble of identical lattices equals single-model viterbi") {
  Rng rng(19);
  ScoreLattice lattice = test::random_lattice(rng, 5, 4, false);
  std::vector<ScoreLattice> four(4, lattice);
  REQUIRE(ensemble_path(four) == viterbi_path(lattice));
}

TEST_CASE("ensemble decoding is permutation invariant") {
  Rng rng(23);
  std::vector<ScoreLattice> models;
  ScoreLattice first = test::random_lattice(rng, 4, 3, false);
  models.push_back(first);
  for (int m = 1; m < 4; ++m) {
    ScoreLattice other = first;
    other.emissions.setRandom();
    other.transitions.setRandom();
    models.push_back(other);
  }
  const std::vector<int> base = ensemble_path(models);
  std::vector<ScoreLattice> rotated = {models[2], models[0], models[3], models[1]};
  REQUIRE(ensemble_path(rotated) == base);
}

TEST_CASE("two-model ensemble equals viterbi of the midpoint lattice") {
  ScoreLattice a = zero_lattice(2, 2);
  a.emissions << 2.0, 0.0, 0.0, 2.0;
  a.transitions << 0.0, 1.0, -1.0, 0.0;
  ScoreLattice b = zero_lattice(2, 2);
  b.emissions << 0.0, 1.0, 3.0, 0.0;
  b.transitions << 2.0, -1.0, 1.0, 0.0;

  ScoreLattice midpoint;
  midpoint.emissions = 0.5 * (a.emissions + b.emissions);
  midpoint.transitions = 0.5 * (a.transitions + b.transitions);

  std::vector<ScoreLattice> both = {a, b};
  REQUIRE(ensemble_path(both) == viterbi_path(midpoint));
  REQUIRE(ensemble_path(both) == test::enum_best_path(midpoint));
}

TEST_CASE("lattice error cases") {
  ScoreLattice empty = zero_lattice(0, 3);
  REQUIRE_THROWS_AS(log_partition(empty), Error);
  REQUIRE_THROWS_AS(viterbi_path(empty), Error);

  ScoreLattice lattice = zero_lattice(2, 3);
  std::vector<int> short_gold = {0};
  REQUIRE_THROWS_AS(nll(lattice, short_gold), Error);

  ScoreLattice other = zero_lattice(3, 3);
  std::vector<ScoreLattice> mixed = {lattice, other};
  REQUIRE_THROWS_AS(ensemble_path(mixed), Error);
  REQUIRE_THROWS_AS(ensemble_path(std::span<const ScoreLattice>{}), Error);
}
