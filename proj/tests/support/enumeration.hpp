#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "seqseg/crf.hpp"

// Brute-force chain CRF reference independent of the forward/Viterbi
// implementation: every quantity is computed by enumerating all K^L tag
// sequences.
namespace seqseg::test {

inline double raw_path_score(const ScoreLattice& lattice, const std::vector<int>& seq) {
  double score = lattice.emissions(0, seq[0]);
  for (std::size_t i = 1; i < seq.size(); ++i) {
    score += lattice.transitions(seq[i - 1], seq[i]) + lattice.emissions(i, seq[i]);
  }
  return score;
}

template <class Fn>
void for_each_sequence(Eigen::Index length, Eigen::Index tags, Fn&& fn) {
  std::vector<int> seq(static_cast<std::size_t>(length), 0);
  while (true) {
    fn(seq);
    std::size_t i = seq.size();
    while (i > 0) {
      --i;
      if (++seq[i] < tags) break;
      seq[i] = 0;
      if (i == 0) return;
    }
  }
}

inline double enum_log_partition(const ScoreLattice& lattice) {
  std::vector<double> scores;
  for_each_sequence(lattice.length(), lattice.tag_count(),
                    [&](const std::vector<int>& seq) { scores.push_back(raw_path_score(lattice, seq)); });
  double m = scores[0];
  for (double s : scores) m = std::max(m, s);
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - m);
  return m + std::log(sum);
}

inline double enum_nll(const ScoreLattice& lattice, const std::vector<int>& gold) {
  return enum_log_partition(lattice) - raw_path_score(lattice, gold);
}

// Highest-scoring sequence under the decoder's tie rule: backtrack-step
// tie-breaking toward the lowest tag index selects, among all maximum-score
// sequences, the one whose reversed tag tuple is lexicographically smallest.
inline std::vector<int> enum_best_path(const ScoreLattice& lattice) {
  std::vector<int> best;
  double best_score = 0.0;
  auto reversed_less = [](const std::vector<int>& a, const std::vector<int>& b) {
    for (std::size_t i = a.size(); i > 0; --i) {
      if (a[i - 1] != b[i - 1]) return a[i - 1] < b[i - 1];
    }
    return false;
  };
  for_each_sequence(lattice.length(), lattice.tag_count(), [&](const std::vector<int>& seq) {
    const double score = raw_path_score(lattice, seq);
    if (best.empty() || score > best_score ||
        (score == best_score && reversed_less(seq, best))) {
      best = seq;
      best_score = score;
    }
  });
  return best;
}

// p(y_i = y) for every position and tag.
inline Eigen::MatrixXd enum_marginals(const ScoreLattice& lattice) {
  const double log_z = enum_log_partition(lattice);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(lattice.length(), lattice.tag_count());
  for_each_sequence(lattice.length(), lattice.tag_count(), [&](const std::vector<int>& seq) {
    const double p = std::exp(raw_path_score(lattice, seq) - log_z);
    for (std::size_t i = 0; i < seq.size(); ++i) out(static_cast<Eigen::Index>(i), seq[i]) += p;
  });
  return out;
}

// Sum over positions i of p(y_i = a, y_{i+1} = b).
inline Eigen::MatrixXd enum_pair_marginals(const ScoreLattice& lattice) {
  const double log_z = enum_log_partition(lattice);
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(lattice.tag_count(), lattice.tag_count());
  for_each_sequence(lattice.length(), lattice.tag_count(), [&](const std::vector<int>& seq) {
    const double p = std::exp(raw_path_score(lattice, seq) - log_z);
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) out(seq[i], seq[i + 1]) += p;
  });
  return out;
}

inline ScoreLattice random_lattice(Rng& rng, Eigen::Index max_len, Eigen::Index max_tags,
                                   bool integer_scores) {
  const auto L = static_cast<Eigen::Index>(1 + rng.below(static_cast<std::size_t>(max_len)));
  const auto K = static_cast<Eigen::Index>(1 + rng.below(static_cast<std::size_t>(max_tags)));
  ScoreLattice lattice;
  lattice.emissions.resize(L, K);
  lattice.transitions.resize(K, K);
  auto draw = [&] {
    if (integer_scores) return static_cast<double>(rng.below(5)) - 2.0;
    return rng.uniform(-2.0, 2.0);
  };
  for (Eigen::Index i = 0; i < L; ++i) {
    for (Eigen::Index k = 0; k < K; ++k) lattice.emissions(i, k) = draw();
  }
  for (Eigen::Index a = 0; a < K; ++a) {
    for (Eigen::Index b = 0; b < K; ++b) lattice.transitions(a, b) = draw();
  }
  return lattice;
}

}  // namespace seqseg::test
