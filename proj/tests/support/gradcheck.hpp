#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "seqseg/crf.hpp"
#include "seqseg/recurrent.hpp"
#include "seqseg/rng.hpp"

namespace seqseg::test {

inline TrainingExample random_example(Rng& rng, const ModelDims& dims, std::size_t max_len) {
  TrainingExample ex;
  const std::size_t length = 1 + rng.below(max_len);
  for (std::size_t i = 0; i < length; ++i) {
    ex.ids.uni.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(dims.uni_rows))));
    ex.ids.bi.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(dims.bi_rows))));
    ex.ids.tri.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(dims.tri_rows))));
    ex.gold.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(dims.tags))));
  }
  return ex;
}

// Mean CRF loss computed through the decoding-path forward only; the
// finite-difference reference for compute_gradients.
inline double batch_loss(std::span<const TrainingExample> batch, const ModelParameters& params) {
  double total = 0.0;
  for (const TrainingExample& ex : batch) {
    total += nll(score_lattice(ex.ids, params), std::span<const int>(ex.gold));
  }
  return total / static_cast<double>(batch.size());
}

// Max relative error between analytic gradients and central differences with
// step 1e-4, over every parameter of every group. The relative error uses
// max(1, |a|, |b|) in the denominator so exact zeros compare exactly.
inline double max_gradient_error(std::span<const TrainingExample> batch,
                                 ModelParameters& params, double step = 1e-4) {
  BatchGradients analytic = compute_gradients(batch, params);
  std::vector<ParamView> param_view = param_views(params);
  std::vector<ParamView> grad_view = param_views(analytic.grads);
  double worst = 0.0;
  for (std::size_t g = 0; g < param_view.size(); ++g) {
    for (Eigen::Index k = 0; k < param_view[g].size; ++k) {
      double& theta = param_view[g].data[k];
      const double saved = theta;
      theta = saved + step;
      const double up = batch_loss(batch, params);
      theta = saved - step;
      const double down = batch_loss(batch, params);
      theta = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = grad_view[g].data[k];
      const double rel =
          std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace seqseg::test
