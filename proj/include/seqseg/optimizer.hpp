#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "seqseg/error.hpp"
#include "seqseg/recurrent.hpp"

namespace seqseg {

// Epoch learning rate eta_t = lr0 / (decay * (t - 1) + 1), t counted from 1.
inline double learning_rate(int epoch, double lr0, double decay) {
  if (epoch < 1) {
    fail(ErrorCode::InvalidEpoch, "epoch index " + std::to_string(epoch) + " is not >= 1");
  }
  return lr0 / (decay * static_cast<double>(epoch - 1) + 1.0);
}

inline double gradient_norm(const ModelParameters& grads) {
  double sum = 0.0;
  for (const ConstParamView& view : param_views(grads)) {
    sum += Eigen::Map<const Eigen::ArrayXd>(view.data, view.size).square().sum();
  }
  return std::sqrt(sum);
}

// Global-norm clipping: if the L2 norm over all gradients exceeds the
// threshold, every gradient is scaled by threshold / norm.
inline void clip_gradients(ModelParameters& grads, double threshold) {
  const double norm = gradient_norm(grads);
  if (!std::isfinite(norm)) fail(ErrorCode::NonFiniteGradient, "non-finite gradient norm");
  if (norm <= threshold || norm == 0.0) return;
  const double scale = threshold / norm;
  for (const ParamView& view : param_views(grads)) {
    Eigen::Map<Eigen::ArrayXd>(view.data, view.size) *= scale;
  }
}

// Per-parameter sums of squared gradients. Accumulators never decrease.
struct OptimizerState {
  ModelParameters accumulators;
  double epsilon = 1e-6;

  static OptimizerState zeros_like(const ModelParameters& params) {
    return OptimizerState{zero_like(params)};
  }
};

// Adagrad update: acc += g^2; theta -= lr * g / (sqrt(acc) + eps).
inline void adagrad_step(ModelParameters& params, const ModelParameters& grads,
                         OptimizerState& state, double lr) {
  std::vector<ParamView> p = param_views(params);
  std::vector<ConstParamView> g = param_views(grads);
  std::vector<ParamView> acc = param_views(state.accumulators);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k].size != g[k].size || p[k].size != acc[k].size) {
      fail(ErrorCode::ShapeMismatch, "optimizer state does not match the parameters");
    }
    Eigen::Map<Eigen::ArrayXd> theta(p[k].data, p[k].size);
    Eigen::Map<const Eigen::ArrayXd> grad(g[k].data, g[k].size);
    Eigen::Map<Eigen::ArrayXd> accum(acc[k].data, acc[k].size);
    accum += grad.square();
    theta -= lr * grad / (accum.sqrt() + state.epsilon);
  }
}

}  // namespace seqseg
