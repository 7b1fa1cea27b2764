#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqseg/crf.hpp"
#include "seqseg/error.hpp"
#include "seqseg/features.hpp"
#include "seqseg/rng.hpp"

namespace seqseg {

// One direction of the GRU: gate equations
//   z = sigmoid(Wz x + Uz h_prev + bz)
//   r = sigmoid(Wr x + Ur h_prev + br)
//   c = tanh(Wc x + Uc (r .* h_prev) + bc)
//   h = z .* h_prev + (1 - z) .* c
// W* are state x input, U* are state x state.
struct GruCellWeights {
  Eigen::MatrixXd w_update, u_update;
  Eigen::MatrixXd w_reset, u_reset;
  Eigen::MatrixXd w_cand, u_cand;
  Eigen::VectorXd b_update, b_reset, b_cand;
};

struct GruWeights {
  GruCellWeights forward;
  GruCellWeights backward;
};

// Linear map from the concatenated bidirectional states to per-tag emission
// scores: S = features * weight + bias, one row per position.
struct ProjectionWeights {
  Eigen::MatrixXd weight;  // (2 * state) x K
  Eigen::VectorXd bias;    // K
};

// Every trainable array of the segmenter. The same struct doubles as the
// gradient and the Adagrad accumulator container, so optimizer code can walk
// the arrays generically.
struct ModelParameters {
  EmbeddingTables embeddings;
  GruWeights gru;
  ProjectionWeights projection;
  Eigen::MatrixXd transitions;  // K x K CRF transition scores
};

// Visits every parameter array with a stable name, in a fixed order shared
// by the optimizer, the gradient check and the checkpoint format.
template <class Params, class Fn>
void for_each_array(Params& p, Fn&& fn) {
  fn("emb.uni", p.embeddings.uni);
  fn("emb.bi", p.embeddings.bi);
  fn("emb.tri", p.embeddings.tri);
  fn("gru.fwd.w_update", p.gru.forward.w_update);
  fn("gru.fwd.u_update", p.gru.forward.u_update);
  fn("gru.fwd.w_reset", p.gru.forward.w_reset);
  fn("gru.fwd.u_reset", p.gru.forward.u_reset);
  fn("gru.fwd.w_cand", p.gru.forward.w_cand);
  fn("gru.fwd.u_cand", p.gru.forward.u_cand);
  fn("gru.fwd.b_update", p.gru.forward.b_update);
  fn("gru.fwd.b_reset", p.gru.forward.b_reset);
  fn("gru.fwd.b_cand", p.gru.forward.b_cand);
  fn("gru.bwd.w_update", p.gru.backward.w_update);
  fn("gru.bwd.u_update", p.gru.backward.u_update);
  fn("gru.bwd.w_reset", p.gru.backward.w_reset);
  fn("gru.bwd.u_reset", p.gru.backward.u_reset);
  fn("gru.bwd.w_cand", p.gru.backward.w_cand);
  fn("gru.bwd.u_cand", p.gru.backward.u_cand);
  fn("gru.bwd.b_update", p.gru.backward.b_update);
  fn("gru.bwd.b_reset", p.gru.backward.b_reset);
  fn("gru.bwd.b_cand", p.gru.backward.b_cand);
  fn("proj.weight", p.projection.weight);
  fn("proj.bias", p.projection.bias);
  fn("crf.transitions", p.transitions);
}

struct ParamView {
  std::string_view name;
  double* data;
  Eigen::Index size;
};

struct ConstParamView {
  std::string_view name;
  const double* data;
  Eigen::Index size;
};

inline std::vector<ParamView> param_views(ModelParameters& p) {
  std::vector<ParamView> views;
  for_each_array(p, [&](std::string_view name, auto& m) {
    views.push_back({name, m.data(), m.size()});
  });
  return views;
}

inline std::vector<ConstParamView> param_views(const ModelParameters& p) {
  std::vector<ConstParamView> views;
  for_each_array(p, [&](std::string_view name, const auto& m) {
    views.push_back({name, m.data(), m.size()});
  });
  return views;
}

struct ModelDims {
  Eigen::Index uni_rows = 0;
  Eigen::Index bi_rows = 0;
  Eigen::Index tri_rows = 0;
  Eigen::Index char_dim = 50;
  Eigen::Index ngram_dim = 50;
  Eigen::Index state = 200;
  Eigen::Index tags = 4;

  Eigen::Index input() const { return char_dim + 2 * ngram_dim; }
};

inline ModelParameters zero_parameters(const ModelDims& d) {
  ModelParameters p;
  p.embeddings.uni = Eigen::MatrixXd::Zero(d.uni_rows, d.char_dim);
  p.embeddings.bi = Eigen::MatrixXd::Zero(d.bi_rows, d.ngram_dim);
  p.embeddings.tri = Eigen::MatrixXd::Zero(d.tri_rows, d.ngram_dim);
  auto cell = [&] {
    GruCellWeights c;
    c.w_update = Eigen::MatrixXd::Zero(d.state, d.input());
    c.u_update = Eigen::MatrixXd::Zero(d.state, d.state);
    c.w_reset = Eigen::MatrixXd::Zero(d.state, d.input());
    c.u_reset = Eigen::MatrixXd::Zero(d.state, d.state);
    c.w_cand = Eigen::MatrixXd::Zero(d.state, d.input());
    c.u_cand = Eigen::MatrixXd::Zero(d.state, d.state);
    c.b_update = Eigen::VectorXd::Zero(d.state);
    c.b_reset = Eigen::VectorXd::Zero(d.state);
    c.b_cand = Eigen::VectorXd::Zero(d.state);
    return c;
  };
  p.gru.forward = cell();
  p.gru.backward = cell();
  p.projection.weight = Eigen::MatrixXd::Zero(2 * d.state, d.tags);
  p.projection.bias = Eigen::VectorXd::Zero(d.tags);
  p.transitions = Eigen::MatrixXd::Zero(d.tags, d.tags);
  return p;
}

inline ModelParameters zero_like(const ModelParameters& other) {
  ModelParameters p = other;
  for_each_array(p, [](std::string_view, auto& m) { m.setZero(); });
  return p;
}

// Uniform fan-in/fan-out initialization for every matrix, embedding tables
// included; biases start at zero. Fill order is fixed so a seed pins the
// whole parameter set.
inline ModelParameters init_parameters(const ModelDims& d, Rng& rng) {
  ModelParameters p = zero_parameters(d);
  for_each_array(p, [&](std::string_view name, auto& m) {
    if (name.starts_with("gru") && name.find(".b_") != std::string_view::npos) {
      return;  // biases stay zero
    }
    if (name == "proj.bias") return;
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-limit, limit);
    }
  });
  return p;
}

namespace detail {

inline Eigen::VectorXd sigmoid(const Eigen::VectorXd& a) {
  return (1.0 / (1.0 + (-a.array()).exp())).matrix();
}

}  // namespace detail

// One GRU update. Exposed mainly for direct inspection; the encoder below
// runs the same equations with cached activations.
inline Eigen::VectorXd gru_step(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                                const GruCellWeights& w) {
  if (x.size() != w.w_update.cols() || h_prev.size() != w.u_update.cols()) {
    fail(ErrorCode::ShapeMismatch, "gru_step input sizes do not match the weights");
  }
  const Eigen::VectorXd z = detail::sigmoid(w.w_update * x + w.u_update * h_prev + w.b_update);
  const Eigen::VectorXd r = detail::sigmoid(w.w_reset * x + w.u_reset * h_prev + w.b_reset);
  const Eigen::VectorXd c =
      (w.w_cand * x + w.u_cand * r.cwiseProduct(h_prev) + w.b_cand).array().tanh().matrix();
  return z.cwiseProduct(h_prev) + (Eigen::VectorXd::Ones(z.size()) - z).cwiseProduct(c);
}

namespace detail {

struct DirectionTrace {
  Eigen::MatrixXd update, reset, cand, state;  // L x H, indexed by position
};

inline void run_direction(const Eigen::MatrixXd& inputs, const GruCellWeights& cell,
                          bool left_to_right, DirectionTrace& trace) {
  const Eigen::Index length = inputs.rows();
  const Eigen::Index state = cell.u_update.rows();
  trace.update.resize(length, state);
  trace.reset.resize(length, state);
  trace.cand.resize(length, state);
  trace.state.resize(length, state);
  // The input contributions have no sequential dependency; hoist them into
  // three matrix products.
  const Eigen::MatrixXd pz = inputs * cell.w_update.transpose();
  const Eigen::MatrixXd pr = inputs * cell.w_reset.transpose();
  const Eigen::MatrixXd pc = inputs * cell.w_cand.transpose();
  Eigen::VectorXd h = Eigen::VectorXd::Zero(state);
  Eigen::VectorXd z(state), r(state), c(state);
  for (Eigen::Index t = 0; t < length; ++t) {
    const Eigen::Index i = left_to_right ? t : length - 1 - t;
    z = sigmoid(pz.row(i).transpose() + cell.u_update * h + cell.b_update);
    r = sigmoid(pr.row(i).transpose() + cell.u_reset * h + cell.b_reset);
    c = (pc.row(i).transpose() + cell.u_cand * r.cwiseProduct(h) + cell.b_cand)
            .array()
            .tanh()
            .matrix();
    trace.update.row(i) = z;
    trace.reset.row(i) = r;
    trace.cand.row(i) = c;
    h = z.cwiseProduct(h) + (Eigen::VectorXd::Ones(state) - z).cwiseProduct(c);
    trace.state.row(i) = h;
  }
}

// Reverse-mode pass for one direction. d_state holds dLoss/dh per position
// from the layers above; weight gradients accumulate into grad and input
// gradients into d_inputs.
inline void backprop_direction(const Eigen::MatrixXd& inputs, const GruCellWeights& cell,
                               const DirectionTrace& trace, const Eigen::MatrixXd& d_state,
                               bool left_to_right, GruCellWeights& grad,
                               Eigen::MatrixXd& d_inputs) {
  const Eigen::Index length = inputs.rows();
  const Eigen::Index state = cell.u_update.rows();
  Eigen::MatrixXd da_update(length, state), da_reset(length, state), da_cand(length, state);
  Eigen::MatrixXd h_prev_rows(length, state), reset_h_rows(length, state);
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(state);
  Eigen::VectorXd h_prev(state), dh(state);
  for (Eigen::Index t = length - 1; t >= 0; --t) {
    const Eigen::Index i = left_to_right ? t : length - 1 - t;
    if (t > 0) {
      h_prev = trace.state.row(left_to_right ? i - 1 : i + 1);
    } else {
      h_prev.setZero();
    }
    const Eigen::ArrayXd z = trace.update.row(i).transpose().array();
    const Eigen::ArrayXd r = trace.reset.row(i).transpose().array();
    const Eigen::ArrayXd c = trace.cand.row(i).transpose().array();
    dh = d_state.row(i).transpose() + carry;
    const Eigen::ArrayXd dz = dh.array() * (h_prev.array() - c);
    const Eigen::ArrayXd dc = dh.array() * (1.0 - z);
    carry = (dh.array() * z).matrix();  // through the copy gate
    da_cand.row(i) = (dc * (1.0 - c * c)).matrix().transpose();
    const Eigen::VectorXd drh = cell.u_cand.transpose() * da_cand.row(i).transpose();
    const Eigen::ArrayXd dr = drh.array() * h_prev.array();
    carry += (drh.array() * r).matrix();
    da_update.row(i) = (dz * z * (1.0 - z)).matrix().transpose();
    da_reset.row(i) = (dr * r * (1.0 - r)).matrix().transpose();
    carry.noalias() += cell.u_update.transpose() * da_update.row(i).transpose();
    carry.noalias() += cell.u_reset.transpose() * da_reset.row(i).transpose();
    h_prev_rows.row(i) = h_prev;
    reset_h_rows.row(i) = (h_prev.array() * r).matrix().transpose();
  }
  grad.w_update.noalias() += da_update.transpose() * inputs;
  grad.u_update.noalias() += da_update.transpose() * h_prev_rows;
  grad.b_update.noalias() += da_update.colwise().sum().transpose();
  grad.w_reset.noalias() += da_reset.transpose() * inputs;
  grad.u_reset.noalias() += da_reset.transpose() * h_prev_rows;
  grad.b_reset.noalias() += da_reset.colwise().sum().transpose();
  grad.w_cand.noalias() += da_cand.transpose() * inputs;
  grad.u_cand.noalias() += da_cand.transpose() * reset_h_rows;
  grad.b_cand.noalias() += da_cand.colwise().sum().transpose();
  d_inputs.noalias() += da_update * cell.w_update;
  d_inputs.noalias() += da_reset * cell.w_reset;
  d_inputs.noalias() += da_cand * cell.w_cand;
}

// Inverted dropout mask: entries are 0 with probability rate, else 1/keep,
// so inference applies no rescaling. Draw order is row-major.
inline Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate,
                                    Rng& rng) {
  const double keep = 1.0 - rate;
  Eigen::MatrixXd mask(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      mask(r, c) = rng.uniform01() < keep ? 1.0 / keep : 0.0;
    }
  }
  return mask;
}

struct EncodeTrace {
  Eigen::MatrixXd dropped_inputs;  // inputs after the input mask
  Eigen::MatrixXd input_mask;      // empty when dropout is inactive
  DirectionTrace fwd, bwd;
  Eigen::MatrixXd output_mask;
};

inline Eigen::MatrixXd encode_bidirectional_impl(const Eigen::MatrixXd& inputs,
                                                 const GruWeights& w, bool dropout_active,
                                                 double dropout_rate, Rng* rng,
                                                 EncodeTrace* trace) {
  if (inputs.cols() != w.forward.w_update.cols() ||
      inputs.cols() != w.backward.w_update.cols()) {
    fail(ErrorCode::ShapeMismatch, "encoder input width does not match the GRU weights");
  }
  const Eigen::Index length = inputs.rows();
  const Eigen::Index state = w.forward.u_update.rows();
  EncodeTrace local;
  EncodeTrace& tr = trace ? *trace : local;

  if (dropout_active && dropout_rate > 0.0) {
    if (rng == nullptr) {
      fail(ErrorCode::EmptyInput, "active dropout requires a random stream");
    }
    tr.input_mask = dropout_mask(length, inputs.cols(), dropout_rate, *rng);
    tr.dropped_inputs = inputs.cwiseProduct(tr.input_mask);
  } else {
    tr.input_mask.resize(0, 0);
    tr.dropped_inputs = inputs;
  }

  run_direction(tr.dropped_inputs, w.forward, true, tr.fwd);
  run_direction(tr.dropped_inputs, w.backward, false, tr.bwd);

  Eigen::MatrixXd features(length, 2 * state);
  features.leftCols(state) = tr.fwd.state;
  features.rightCols(state) = tr.bwd.state;
  if (dropout_active && dropout_rate > 0.0) {
    tr.output_mask = dropout_mask(length, 2 * state, dropout_rate, *rng);
    features = features.cwiseProduct(tr.output_mask);
  } else {
    tr.output_mask.resize(0, 0);
  }
  return features;
}

}  // namespace detail

// Bidirectional encoding of a sentence: position i yields the forward state
// at i concatenated with the backward state at i. When dropout is active,
// inverted dropout is applied to the input vectors and to the concatenated
// outputs.
inline Eigen::MatrixXd encode_bidirectional(const Eigen::MatrixXd& inputs, const GruWeights& w,
                                            bool dropout_active = false,
                                            double dropout_rate = 0.5, Rng* rng = nullptr) {
  return detail::encode_bidirectional_impl(inputs, w, dropout_active, dropout_rate, rng,
                                           nullptr);
}

inline Eigen::MatrixXd emission_scores(const Eigen::MatrixXd& features,
                                       const ProjectionWeights& p) {
  if (features.cols() != p.weight.rows() || p.weight.cols() != p.bias.size()) {
    fail(ErrorCode::ShapeMismatch, "projection shapes do not match the features");
  }
  Eigen::MatrixXd scores = features * p.weight;
  scores.rowwise() += p.bias.transpose();
  return scores;
}

// Emission lattice for decoding (dropout inactive).
inline ScoreLattice score_lattice(const EncodedStream& ids, const ModelParameters& params) {
  const Eigen::MatrixXd inputs = embed_stream(ids, params.embeddings);
  const Eigen::MatrixXd features = encode_bidirectional(inputs, params.gru);
  return ScoreLattice{emission_scores(features, params.projection), params.transitions};
}

// One supervised sentence (possibly a chopped fragment): context ids plus
// gold tags over the same stream.
struct TrainingExample {
  EncodedStream ids;
  std::vector<int> gold;
};

struct BatchGradients {
  double loss = 0.0;
  ModelParameters grads;
};

// Mean CRF negative log likelihood over the batch and its exact gradients
// for every parameter. Parameters without a forward path in this batch
// (untouched embedding rows in particular) get zero gradient.
inline BatchGradients compute_gradients(std::span<const TrainingExample> batch,
                                        const ModelParameters& params,
                                        double dropout_rate = 0.0, Rng* rng = nullptr) {
  if (batch.empty()) fail(ErrorCode::EmptyCorpus, "empty training batch");
  const bool dropout_active = dropout_rate > 0.0 && rng != nullptr;
  const Eigen::Index state = params.gru.forward.u_update.rows();
  const auto d_uni = params.embeddings.uni.cols();
  const auto d_bi = params.embeddings.bi.cols();
  const auto d_tri = params.embeddings.tri.cols();

  BatchGradients out;
  out.grads = zero_like(params);
  const double scale = 1.0 / static_cast<double>(batch.size());

  for (const TrainingExample& example : batch) {
    if (example.gold.size() != example.ids.size()) {
      fail(ErrorCode::LengthMismatch, "gold tags do not cover the example stream");
    }
    const auto length = static_cast<Eigen::Index>(example.ids.size());
    const Eigen::MatrixXd inputs = embed_stream(example.ids, params.embeddings);

    detail::EncodeTrace trace;
    const Eigen::MatrixXd features = detail::encode_bidirectional_impl(
        inputs, params.gru, dropout_active, dropout_rate, rng, &trace);
    const Eigen::MatrixXd scores = emission_scores(features, params.projection);

    const ScoreLattice lattice{scores, params.transitions};
    CrfGradients crf = nll_gradients(lattice, example.gold);
    if (!std::isfinite(crf.nll)) {
      fail(ErrorCode::NonFiniteLoss, "non-finite sentence loss");
    }
    out.loss += scale * crf.nll;

    // Projection.
    const Eigen::MatrixXd d_scores = scale * crf.d_emissions;
    out.grads.projection.weight.noalias() += features.transpose() * d_scores;
    out.grads.projection.bias.noalias() += d_scores.colwise().sum().transpose();
    out.grads.transitions += scale * crf.d_transitions;

    // Bidirectional states.
    Eigen::MatrixXd d_features = d_scores * params.projection.weight.transpose();
    if (trace.output_mask.size() > 0) {
      d_features = d_features.cwiseProduct(trace.output_mask);
    }
    Eigen::MatrixXd d_inputs = Eigen::MatrixXd::Zero(length, inputs.cols());
    detail::backprop_direction(trace.dropped_inputs, params.gru.forward, trace.fwd,
                               d_features.leftCols(state), true, out.grads.gru.forward,
                               d_inputs);
    detail::backprop_direction(trace.dropped_inputs, params.gru.backward, trace.bwd,
                               d_features.rightCols(state), false, out.grads.gru.backward,
                               d_inputs);
    if (trace.input_mask.size() > 0) {
      d_inputs = d_inputs.cwiseProduct(trace.input_mask);
    }

    // Scatter into the embedding tables.
    for (Eigen::Index i = 0; i < length; ++i) {
      const auto pos = static_cast<std::size_t>(i);
      out.grads.embeddings.uni.row(example.ids.uni[pos]) += d_inputs.row(i).head(d_uni);
      out.grads.embeddings.bi.row(example.ids.bi[pos]) += d_inputs.row(i).segment(d_uni, d_bi);
      out.grads.embeddings.tri.row(example.ids.tri[pos]) += d_inputs.row(i).tail(d_tri);
    }
  }
  if (!std::isfinite(out.loss)) fail(ErrorCode::NonFiniteLoss, "non-finite batch loss");
  return out;
}

}  // namespace seqseg
