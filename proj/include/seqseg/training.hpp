#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "seqseg/checkpoint.hpp"
#include "seqseg/config.hpp"
#include "seqseg/corpus.hpp"
#include "seqseg/crf.hpp"
#include "seqseg/features.hpp"
#include "seqseg/metrics.hpp"
#include "seqseg/optimizer.hpp"
#include "seqseg/recurrent.hpp"
#include "seqseg/rng.hpp"

namespace seqseg {

using Corpus = std::vector<Sentence>;

// ---------------------------------------------------------------------------
// Decoding with trained models (single or ensemble).

// A raw stream prepared for tagging. In BIESX mode the stream carries one
// boundary slot between words and `boundary` marks those slots; in BIES mode
// `boundary` stays empty.
struct PredictInput {
  std::vector<std::string> stream;
  std::vector<bool> boundary;
};

inline PredictInput predict_input_from_units(std::vector<std::string> units) {
  return PredictInput{std::move(units), {}};
}

inline PredictInput predict_input_from_words(const std::vector<std::vector<std::string>>& words) {
  PredictInput input;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (w > 0) {
      input.stream.push_back(kBoundaryUnit);
      input.boundary.push_back(true);
    }
    for (const std::string& unit : words[w]) {
      input.stream.push_back(unit);
      input.boundary.push_back(false);
    }
  }
  return input;
}

// Stream for a gold sentence, scheme-appropriately.
inline PredictInput predict_input_for(const Sentence& s, TagScheme scheme) {
  if (scheme.kind == TagKind::BIES) return predict_input_from_units(s.units);
  std::vector<std::vector<std::string>> words;
  words.reserve(s.words.size());
  for (const Span& w : s.words) {
    words.emplace_back(s.units.begin() + static_cast<std::ptrdiff_t>(w.begin),
                       s.units.begin() + static_cast<std::ptrdiff_t>(w.end));
  }
  return predict_input_from_words(words);
}

namespace detail {

inline void check_ensemble(std::span<const Checkpoint> models) {
  if (models.empty()) fail(ErrorCode::EmptyInput, "no models to decode with");
  for (const Checkpoint& m : models) {
    if (m.config.scheme != models[0].config.scheme) {
      fail(ErrorCode::SchemeMismatch, "ensemble models use different tag schemes");
    }
    if (m.config.unit_mode != models[0].config.unit_mode) {
      fail(ErrorCode::SchemeMismatch, "ensemble models disagree on unit mode");
    }
  }
}

}  // namespace detail

// Tags a stream: sentences beyond the length limit are chopped, each
// fragment is decoded over the element-wise mean of the models' emission and
// transition scores, and the fragment tags are stitched back together.
inline TagSequence predict_tags(std::span<const Checkpoint> models, const PredictInput& input) {
  detail::check_ensemble(models);
  const TagScheme scheme = models[0].config.scheme;
  if (input.stream.empty()) fail(ErrorCode::EmptyInput, "empty stream");
  if (scheme.kind == TagKind::BIESX && input.boundary.size() != input.stream.size()) {
    fail(ErrorCode::LengthMismatch, "boundary mask does not cover the stream");
  }

  std::vector<EncodedStream> encoded;
  encoded.reserve(models.size());
  for (const Checkpoint& m : models) encoded.push_back(encode_stream(input.stream, m.vocab));

  const auto limit = static_cast<std::size_t>(std::max(1, models[0].config.length_limit));
  std::vector<TagSequence> fragments;
  for (const Span& span : chop_spans(input.stream.size(), limit)) {
    std::vector<ScoreLattice> lattices;
    lattices.reserve(models.size());
    for (std::size_t m = 0; m < models.size(); ++m) {
      lattices.push_back(
          score_lattice(slice(encoded[m], span.begin, span.end), models[m].params));
    }
    fragments.push_back(TagSequence{ensemble_path(lattices), scheme});
  }
  TagSequence tags = stitch(fragments);
  return snap_tags_to_boundaries(input.boundary, std::move(tags));
}

inline Sentence predict_sentence(std::span<const Checkpoint> models, const PredictInput& input) {
  return decode_tags(input.stream, predict_tags(models, input));
}

// ---------------------------------------------------------------------------
// Training.

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double dev_f1 = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

namespace detail {

// Dev sentences prepared once: context ids are fixed by the vocabulary, so
// per-epoch evaluation only reruns the forward pass.
struct DevItem {
  PredictInput input;
  EncodedStream encoded;
  std::vector<Span> fragments;
};

}  // namespace detail

inline TrainResult train(const TrainConfig& config, const Corpus& train_corpus,
                         const Corpus& dev_corpus, std::ostream* log_stream = nullptr) {
  if (train_corpus.empty()) fail(ErrorCode::EmptyCorpus, "empty training corpus");
  if (dev_corpus.empty()) fail(ErrorCode::EmptyCorpus, "empty development corpus");
  const TagScheme scheme = config.scheme;
  const SegmentLevel level =
      scheme.kind == TagKind::BIESX ? SegmentLevel::Morph : SegmentLevel::Word;
  const auto limit = static_cast<std::size_t>(std::max(1, config.length_limit));

  // Vocabulary over the tagged unit streams of the training corpus.
  std::vector<std::vector<std::string>> streams;
  streams.reserve(train_corpus.size());
  for (const Sentence& s : train_corpus) streams.push_back(tagged_stream(s, scheme));
  const Vocabulary vocab = Vocabulary::build(streams);

  // Training items: over-long streams are chopped and gold tags sliced along
  // with them. Buckets of width 10 group items of similar length; batches
  // are drawn within a bucket.
  std::vector<std::vector<TrainingExample>> buckets;
  auto bucket_of = [&](std::size_t length) -> std::vector<TrainingExample>& {
    const std::size_t index = (length - 1) / 10;
    if (buckets.size() <= index) buckets.resize(index + 1);
    return buckets[index];
  };
  for (std::size_t n = 0; n < train_corpus.size(); ++n) {
    const TagSequence gold = encode_tags(train_corpus[n], scheme);
    const EncodedStream encoded = encode_stream(streams[n], vocab);
    for (const Span& span : chop_spans(streams[n].size(), limit)) {
      TrainingExample item;
      item.ids = slice(encoded, span.begin, span.end);
      item.gold.assign(gold.tags.begin() + static_cast<std::ptrdiff_t>(span.begin),
                       gold.tags.begin() + static_cast<std::ptrdiff_t>(span.end));
      bucket_of(item.ids.size()).push_back(std::move(item));
    }
  }
  std::size_t item_count = 0;
  for (const auto& bucket : buckets) item_count += bucket.size();

  // Dev set prepared once.
  std::vector<detail::DevItem> dev_items;
  std::vector<Sentence> dev_gold;
  dev_items.reserve(dev_corpus.size());
  for (const Sentence& s : dev_corpus) {
    detail::DevItem item;
    item.input = predict_input_for(s, scheme);
    item.encoded = encode_stream(item.input.stream, vocab);
    item.fragments = chop_spans(item.input.stream.size(), limit);
    dev_items.push_back(std::move(item));
    dev_gold.push_back(s);
  }

  const ModelDims dims{.uni_rows = vocab.uni_size(),
                       .bi_rows = vocab.bi_size(),
                       .tri_rows = vocab.tri_size(),
                       .char_dim = config.char_vec,
                       .ngram_dim = config.ngram_vecs,
                       .state = config.state,
                       .tags = scheme.size()};
  Rng rng(config.seed);
  ModelParameters params = init_parameters(dims, rng);
  OptimizerState optimizer = OptimizerState::zeros_like(params);

  TrainResult result;
  result.checkpoint.config = config;
  result.checkpoint.vocab = vocab;

  // Model selection: the best dev F1 among epochs >= min_best_epoch, earlier
  // epoch winning ties. If training aborts on a non-finite loss, the best
  // epoch seen so far (eligible or not) is returned instead.
  ModelParameters best_params = params;
  int best_epoch = 0;
  double best_f1 = -1.0;
  ModelParameters fallback_params = params;
  int fallback_epoch = 0;
  double fallback_f1 = -1.0;
  const int eligibility =
      config.epochs < config.min_best_epoch ? 1 : config.min_best_epoch;

  std::vector<std::size_t> bucket_order;
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    if (!buckets[b].empty()) bucket_order.push_back(b);
  }

  const auto batch_size = static_cast<std::size_t>(std::max(1, config.batch));
  bool aborted = false;
  for (int epoch = 1; epoch <= config.epochs && !aborted; ++epoch) {
    const double lr = learning_rate(epoch, config.lr0, config.decay);
    for (auto& bucket : buckets) rng.shuffle(bucket);
    rng.shuffle(bucket_order);

    double loss_sum = 0.0;
    try {
      for (std::size_t b : bucket_order) {
        const std::vector<TrainingExample>& bucket = buckets[b];
        for (std::size_t begin = 0; begin < bucket.size(); begin += batch_size) {
          const std::size_t n = std::min(batch_size, bucket.size() - begin);
          BatchGradients batch = compute_gradients(
              std::span<const TrainingExample>(bucket.data() + begin, n), params,
              config.dropout, &rng);
          loss_sum += batch.loss * static_cast<double>(n);
          clip_gradients(batch.grads, config.clip);
          adagrad_step(params, batch.grads, optimizer, lr);
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteLoss || fallback_epoch == 0) throw;
      aborted = true;
      break;
    }
    const double epoch_loss = loss_sum / static_cast<double>(item_count);

    std::vector<Sentence> predictions;
    predictions.reserve(dev_items.size());
    for (const detail::DevItem& item : dev_items) {
      std::vector<TagSequence> fragments;
      fragments.reserve(item.fragments.size());
      for (const Span& span : item.fragments) {
        const ScoreLattice lattice =
            score_lattice(slice(item.encoded, span.begin, span.end), params);
        fragments.push_back(TagSequence{viterbi_path(lattice), scheme});
      }
      TagSequence tags = snap_tags_to_boundaries(item.input.boundary, stitch(fragments));
      predictions.push_back(decode_tags(item.input.stream, tags));
    }
    const double dev_f1 = segment_prf(dev_gold, predictions, level).f1;

    result.log.push_back({epoch, lr, epoch_loss, dev_f1});
    if (log_stream != nullptr) {
      char line[128];
      std::snprintf(line, sizeof(line), "epoch %d lr %.8g loss %.6f devF1 %.4f", epoch, lr,
                    epoch_loss, dev_f1);
      (*log_stream) << line << '\n' << std::flush;
    }
    if (dev_f1 > fallback_f1) {
      fallback_f1 = dev_f1;
      fallback_epoch = epoch;
      fallback_params = params;
    }
    if (epoch >= eligibility && dev_f1 > best_f1) {
      best_f1 = dev_f1;
      best_epoch = epoch;
      best_params = params;
    }
  }

  if (best_epoch == 0) {
    best_params = fallback_params;
    best_epoch = fallback_epoch;
    best_f1 = fallback_f1;
  }
  result.checkpoint.params = std::move(best_params);
  result.checkpoint.best_epoch = best_epoch;
  result.checkpoint.best_dev_f1 = best_f1;
  return result;
}

// Independent runs that differ only in their seed. Runs may execute in
// parallel; results come back in seed order either way.
inline std::vector<TrainResult> train_ensemble(const TrainConfig& config,
                                               const Corpus& train_corpus,
                                               const Corpus& dev_corpus,
                                               std::span<const std::uint64_t> seeds,
                                               unsigned max_parallel = 0) {
  if (seeds.empty()) fail(ErrorCode::EmptyInput, "no seeds given");
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) {
    fail(ErrorCode::DuplicateSeeds, "ensemble seeds must be pairwise distinct");
  }
  if (max_parallel == 0) max_parallel = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(max_parallel, seeds.size());

  std::vector<TrainResult> results(seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= seeds.size()) return;
      try {
        TrainConfig run = config;
        run.seed = seeds[k];
        results[k] = train(run, train_corpus, dev_corpus, nullptr);
      } catch (...) {
        std::lock_guard<std::mutex> hold(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace seqseg
