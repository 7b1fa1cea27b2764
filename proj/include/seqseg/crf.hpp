#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "seqseg/corpus.hpp"
#include "seqseg/error.hpp"

namespace seqseg {

// First-order chain CRF scores for one sentence: per-position emission
// scores S (L x K) and tag-transition scores T (K x K), T(a, b) scoring tag a
// followed by tag b. There are no distinguished start/stop scores.
struct ScoreLattice {
  Eigen::MatrixXd emissions;
  Eigen::MatrixXd transitions;

  Eigen::Index length() const { return emissions.rows(); }
  Eigen::Index tag_count() const { return emissions.cols(); }
};

namespace detail {

inline void check_lattice(const ScoreLattice& lattice) {
  if (lattice.length() == 0) fail(ErrorCode::EmptyLattice, "lattice has no positions");
  if (lattice.transitions.rows() != lattice.tag_count() ||
      lattice.transitions.cols() != lattice.tag_count()) {
    fail(ErrorCode::ShapeMismatch, "transition matrix does not match tag count");
  }
}

inline double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

inline void check_gold(const ScoreLattice& lattice, std::span<const int> gold) {
  if (static_cast<Eigen::Index>(gold.size()) != lattice.length()) {
    fail(ErrorCode::LengthMismatch,
         "gold length " + std::to_string(gold.size()) + " vs lattice length " +
             std::to_string(lattice.length()));
  }
  for (int y : gold) {
    if (y < 0 || y >= lattice.tag_count()) {
      fail(ErrorCode::IndexOutOfRange, "gold tag " + std::to_string(y));
    }
  }
}

}  // namespace detail

inline double path_score(const ScoreLattice& lattice, std::span<const int> gold) {
  detail::check_lattice(lattice);
  detail::check_gold(lattice, gold);
  double score = lattice.emissions(0, gold[0]);
  for (Eigen::Index i = 1; i < lattice.length(); ++i) {
    score += lattice.transitions(gold[i - 1], gold[i]) + lattice.emissions(i, gold[i]);
  }
  return score;
}

// log sum over all tag sequences of exp(path score), by the forward
// algorithm in log space. O(L * K^2).
inline double log_partition(const ScoreLattice& lattice) {
  detail::check_lattice(lattice);
  const Eigen::Index L = lattice.length();
  const Eigen::Index K = lattice.tag_count();
  Eigen::VectorXd alpha = lattice.emissions.row(0).transpose();
  Eigen::VectorXd next(K);
  for (Eigen::Index i = 1; i < L; ++i) {
    for (Eigen::Index b = 0; b < K; ++b) {
      next(b) = lattice.emissions(i, b) +
                detail::log_sum_exp(alpha + lattice.transitions.col(b));
    }
    alpha = next;
  }
  return detail::log_sum_exp(alpha);
}

inline double nll(const ScoreLattice& lattice, std::span<const int> gold) {
  return log_partition(lattice) - path_score(lattice, gold);
}

inline double nll(const ScoreLattice& lattice, const TagSequence& gold) {
  return nll(lattice, std::span<const int>(gold.tags));
}

// Highest-scoring tag sequence. Ties are broken toward the lowest tag index
// at each backtrack step (and at the final position), which makes decoding
// deterministic.
inline std::vector<int> viterbi_path(const ScoreLattice& lattice) {
  detail::check_lattice(lattice);
  const Eigen::Index L = lattice.length();
  const Eigen::Index K = lattice.tag_count();
  Eigen::MatrixXd delta(L, K);
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> back(L, K);
  delta.row(0) = lattice.emissions.row(0);
  for (Eigen::Index i = 1; i < L; ++i) {
    for (Eigen::Index b = 0; b < K; ++b) {
      Eigen::Index arg = 0;
      double best = delta(i - 1, 0) + lattice.transitions(0, b);
      for (Eigen::Index a = 1; a < K; ++a) {
        const double score = delta(i - 1, a) + lattice.transitions(a, b);
        if (score > best) {
          best = score;
          arg = a;
        }
      }
      delta(i, b) = best + lattice.emissions(i, b);
      back(i, b) = arg;
    }
  }
  Eigen::Index tail = 0;
  for (Eigen::Index b = 1; b < K; ++b) {
    if (delta(L - 1, b) > delta(L - 1, tail)) tail = b;
  }
  std::vector<int> tags(static_cast<std::size_t>(L));
  tags[static_cast<std::size_t>(L - 1)] = static_cast<int>(tail);
  for (Eigen::Index i = L - 1; i > 0; --i) {
    tail = back(i, tail);
    tags[static_cast<std::size_t>(i - 1)] = static_cast<int>(tail);
  }
  return tags;
}

inline TagSequence viterbi(const ScoreLattice& lattice, TagScheme scheme) {
  if (lattice.tag_count() != scheme.size()) {
    fail(ErrorCode::ShapeMismatch, "lattice tag count does not match the scheme");
  }
  return TagSequence{viterbi_path(lattice), scheme};
}

// CRF negative log likelihood and its exact partial derivatives with respect
// to the emission and transition scores, via forward-backward marginals.
struct CrfGradients {
  double nll = 0.0;
  Eigen::MatrixXd d_emissions;    // marginal(i, y) - 1{gold_i = y}
  Eigen::MatrixXd d_transitions;  // expected - observed transition counts
};

inline CrfGradients nll_gradients(const ScoreLattice& lattice, std::span<const int> gold) {
  detail::check_lattice(lattice);
  detail::check_gold(lattice, gold);
  const Eigen::Index L = lattice.length();
  const Eigen::Index K = lattice.tag_count();
  Eigen::MatrixXd alpha(L, K);
  Eigen::MatrixXd beta(L, K);
  alpha.row(0) = lattice.emissions.row(0);
  for (Eigen::Index i = 1; i < L; ++i) {
    for (Eigen::Index b = 0; b < K; ++b) {
      alpha(i, b) =
          lattice.emissions(i, b) +
          detail::log_sum_exp(alpha.row(i - 1).transpose() + lattice.transitions.col(b));
    }
  }
  beta.row(L - 1).setZero();
  for (Eigen::Index i = L - 2; i >= 0; --i) {
    for (Eigen::Index a = 0; a < K; ++a) {
      beta(i, a) = detail::log_sum_exp(lattice.transitions.row(a).transpose() +
                                       lattice.emissions.row(i + 1).transpose() +
                                       beta.row(i + 1).transpose());
    }
  }
  const double log_z = detail::log_sum_exp(alpha.row(L - 1).transpose());

  CrfGradients out;
  out.d_emissions = ((alpha + beta).array() - log_z).exp().matrix();
  out.d_transitions.setZero(K, K);
  for (Eigen::Index i = 0; i + 1 < L; ++i) {
    for (Eigen::Index a = 0; a < K; ++a) {
      for (Eigen::Index b = 0; b < K; ++b) {
        out.d_transitions(a, b) += std::exp(alpha(i, a) + lattice.transitions(a, b) +
                                            lattice.emissions(i + 1, b) + beta(i + 1, b) -
                                            log_z);
      }
    }
  }
  double gold_score = lattice.emissions(0, gold[0]);
  out.d_emissions(0, gold[0]) -= 1.0;
  for (Eigen::Index i = 1; i < L; ++i) {
    gold_score += lattice.transitions(gold[i - 1], gold[i]) + lattice.emissions(i, gold[i]);
    out.d_emissions(i, gold[i]) -= 1.0;
    out.d_transitions(gold[i - 1], gold[i]) -= 1.0;
  }
  out.nll = log_z - gold_score;
  return out;
}

// Decoding over the element-wise means of the emission and transition
// scores of independently trained models.
inline ScoreLattice mean_lattice(std::span<const ScoreLattice> lattices) {
  if (lattices.empty()) fail(ErrorCode::EmptyLattice, "no lattices to average");
  ScoreLattice mean = lattices[0];
  for (std::size_t m = 1; m < lattices.size(); ++m) {
    if (lattices[m].length() != mean.length() || lattices[m].tag_count() != mean.tag_count()) {
      fail(ErrorCode::ShapeMismatch, "ensemble lattices disagree on shape");
    }
    mean.emissions += lattices[m].emissions;
    mean.transitions += lattices[m].transitions;
  }
  const double inv = 1.0 / static_cast<double>(lattices.size());
  mean.emissions *= inv;
  mean.transitions *= inv;
  return mean;
}

inline std::vector<int> ensemble_path(std::span<const ScoreLattice> lattices) {
  return viterbi_path(mean_lattice(lattices));
}

inline TagSequence ensemble_decode(std::span<const ScoreLattice> lattices, TagScheme scheme) {
  return viterbi(mean_lattice(lattices), scheme);
}

}  // namespace seqseg
