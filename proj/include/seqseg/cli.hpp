#pragma once

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "seqseg/checkpoint.hpp"
#include "seqseg/config.hpp"
#include "seqseg/corpus.hpp"
#include "seqseg/metrics.hpp"
#include "seqseg/training.hpp"

namespace seqseg::cli {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (in.bad()) fail(ErrorCode::IoFailure, "failed reading '" + path + "'");
  return lines;
}

// Parses a segmented corpus file, rewrapping parse errors with file:line
// context.
inline Corpus read_corpus(const std::string& path, TagScheme scheme, bool unit_mode) {
  const std::vector<std::string> lines = read_lines(path);
  Corpus corpus;
  corpus.reserve(lines.size());
  for (std::size_t n = 0; n < lines.size(); ++n) {
    try {
      corpus.push_back(scheme.kind == TagKind::BIESX ? parse_morpheme_line(lines[n])
                                                     : parse_word_line(lines[n], unit_mode));
    } catch (const Error& e) {
      throw Error(e.code(), path + ":" + std::to_string(n + 1) + ": " + e.detail());
    }
  }
  return corpus;
}

inline unsigned decode_threads() {
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SEQSEG_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed >= 1) threads = static_cast<unsigned>(parsed);
  }
  return threads;
}

// Raw decode input for one line: code points (or space-separated units in
// unit mode) for word segmentation, space-separated words for morpheme
// segmentation.
inline PredictInput parse_raw_line(const std::string& line, TagScheme scheme, bool unit_mode) {
  if (scheme.kind == TagKind::BIESX) {
    std::vector<std::vector<std::string>> words;
    for (const std::string& word : split(line, " ")) {
      if (word.empty()) continue;
      words.push_back(utf8_units(word));
    }
    return predict_input_from_words(words);
  }
  if (unit_mode) {
    std::vector<std::string> units;
    for (const std::string& unit : split(line, " ")) {
      if (!unit.empty()) units.push_back(unit);
    }
    return predict_input_from_units(std::move(units));
  }
  return predict_input_from_units(utf8_units(line));
}

// Segments raw lines with the given models, in parallel across lines; the
// output order always matches the input order. Blank lines pass through.
inline std::vector<std::string> decode_lines(const std::vector<Checkpoint>& models,
                                             const std::vector<std::string>& lines) {
  const TagScheme scheme = models.front().config.scheme;
  const bool unit_mode = models.front().config.unit_mode;
  std::vector<std::string> out(lines.size());
  const unsigned threads =
      std::min<unsigned>(decode_threads(), std::max<std::size_t>(1, lines.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= lines.size()) return;
      try {
        if (is_blank(lines[k])) continue;
        const PredictInput input = parse_raw_line(lines[k], scheme, unit_mode);
        if (input.stream.empty()) continue;
        out[k] = format_sentence(predict_sentence(models, input), unit_mode);
      } catch (...) {
        std::lock_guard<std::mutex> hold(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

inline void write_lines(const std::vector<std::string>& lines, const std::string& out_path,
                        std::ostream& fallback) {
  if (out_path.empty()) {
    for (const std::string& line : lines) fallback << line << '\n';
    return;
  }
  std::ofstream out(out_path);
  if (!out) fail(ErrorCode::IoFailure, "cannot open '" + out_path + "' for writing");
  for (const std::string& line : lines) out << line << '\n';
  if (!out) fail(ErrorCode::IoFailure, "failed writing '" + out_path + "'");
}

struct TrainArgs {
  std::string train_path, dev_path, config_path, out_path;
  std::string scheme;
  bool unit_mode = false;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::vector<std::uint64_t> seeds;
};

inline int run_train(const TrainArgs& args, std::ostream& out) {
  TrainConfig config;
  if (!args.config_path.empty()) config = parse_config_file(args.config_path);
  if (!args.scheme.empty()) apply_config_entry(config, "scheme", args.scheme);
  if (args.unit_mode) config.unit_mode = true;
  if (args.seed_given) config.seed = args.seed;

  const Corpus train_corpus = read_corpus(args.train_path, config.scheme, config.unit_mode);
  const Corpus dev_corpus = read_corpus(args.dev_path, config.scheme, config.unit_mode);

  auto finish = [&](const TrainResult& result, const std::string& path,
                    const std::string& log_text) {
    save_checkpoint(result.checkpoint, path);
    std::ofstream log(path + ".log");
    if (!log) fail(ErrorCode::IoFailure, "cannot open '" + path + ".log' for writing");
    log << log_text;
    char line[160];
    std::snprintf(line, sizeof(line), "wrote %s (best epoch %d, dev F1 %.4f)", path.c_str(),
                  result.checkpoint.best_epoch, result.checkpoint.best_dev_f1);
    out << line << '\n';
  };

  if (args.seeds.empty()) {
    std::ostringstream log;
    TrainResult result = train(config, train_corpus, dev_corpus, &log);
    out << log.str();
    finish(result, args.out_path, log.str());
    return 0;
  }

  std::vector<TrainResult> results =
      train_ensemble(config, train_corpus, dev_corpus, args.seeds);
  for (std::size_t k = 0; k < results.size(); ++k) {
    std::ostringstream log;
    for (const EpochLog& entry : results[k].log) {
      char line[128];
      std::snprintf(line, sizeof(line), "epoch %d lr %.8g loss %.6f devF1 %.4f", entry.epoch,
                    entry.lr, entry.loss, entry.dev_f1);
      log << line << '\n';
    }
    finish(results[k], args.out_path + ".seed" + std::to_string(args.seeds[k]), log.str());
  }
  return 0;
}

inline std::vector<Checkpoint> load_models(const std::vector<std::string>& paths) {
  std::vector<Checkpoint> models;
  models.reserve(paths.size());
  for (const std::string& path : paths) models.push_back(load_checkpoint(path));
  detail::check_ensemble(models);
  return models;
}

inline int run_eval(const std::string& level, const std::string& gold_path,
                    const std::string& pred_path, bool unit_mode, const std::string& diff_path,
                    std::ostream& out) {
  const TagScheme scheme{level == "word" ? TagKind::BIES : TagKind::BIESX};
  const Corpus gold = read_corpus(gold_path, scheme, unit_mode);
  const Corpus pred = read_corpus(pred_path, scheme, unit_mode);
  auto score = [&](std::span<const Sentence> g, std::span<const Sentence> p) {
    if (level == "affix") return affix_prf(g, p);
    return segment_prf(g, p, level == "morph" ? SegmentLevel::Morph : SegmentLevel::Word);
  };
  out << format_prf(score(gold, pred)) << '\n';
  if (!diff_path.empty()) {
    std::ofstream diff(diff_path);
    if (!diff) fail(ErrorCode::IoFailure, "cannot open '" + diff_path + "' for writing");
    diff << "sentence\ttp\tfp\tfn\tprecision\trecall\tf1\n";
    for (std::size_t n = 0; n < gold.size(); ++n) {
      const PrfResult r = score(std::span<const Sentence>(&gold[n], 1),
                                std::span<const Sentence>(&pred[n], 1));
      char line[96];
      std::snprintf(line, sizeof(line), "%zu\t%lld\t%lld\t%lld\t%.4f\t%.4f\t%.4f", n + 1, r.tp,
                    r.fp, r.fn, r.precision, r.recall, r.f1);
      diff << line << '\n';
    }
  }
  return 0;
}

inline int run_inspect(const std::string& path, std::ostream& out) {
  const Checkpoint c = load_checkpoint(path);
  out << "format_version " << c.format_version << '\n';
  out << "scheme " << c.config.scheme.name() << '\n';
  out << "unit_mode " << (c.config.unit_mode ? "true" : "false") << '\n';
  out << "char_vec " << c.config.char_vec << '\n';
  out << "ngram_vecs " << c.config.ngram_vecs << '\n';
  out << "state " << c.config.state << '\n';
  out << "lr0 " << c.config.lr0 << '\n';
  out << "decay " << c.config.decay << '\n';
  out << "clip " << c.config.clip << '\n';
  out << "dropout " << c.config.dropout << '\n';
  out << "batch " << c.config.batch << '\n';
  out << "length_limit " << c.config.length_limit << '\n';
  out << "epochs " << c.config.epochs << '\n';
  out << "min_best_epoch " << c.config.min_best_epoch << '\n';
  out << "seed " << c.config.seed << '\n';
  out << "vocab_uni " << c.vocab.uni_size() << '\n';
  out << "vocab_bi " << c.vocab.bi_size() << '\n';
  out << "vocab_tri " << c.vocab.tri_size() << '\n';
  out << "best_epoch " << c.best_epoch << '\n';
  char f1[32];
  std::snprintf(f1, sizeof(f1), "%.4f", c.best_dev_f1);
  out << "best_dev_f1 " << f1 << '\n';
  for_each_array(c.params, [&](std::string_view name, const auto& m) {
    out << "param " << name << ' ' << m.rows() << 'x' << m.cols() << '\n';
  });
  return 0;
}

// Command-line front end. Streams are injectable for tests.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Character-level BiRNN-CRF word and morpheme segmentation"};
  app.require_subcommand(1);

  TrainArgs train_args;
  std::string seeds_text;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model on a segmented corpus");
  train_cmd->add_option("train", train_args.train_path, "training corpus")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("dev", train_args.dev_path, "development corpus")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--config", train_args.config_path, "key=value config file")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_args.out_path, "checkpoint output path")->required();
  CLI::Option* seed_opt = train_cmd->add_option("--seed", train_args.seed, "random seed");
  train_cmd->add_option("--seeds", seeds_text, "comma-separated seeds for an ensemble");
  train_cmd->add_option("--scheme", train_args.scheme, "tag scheme: bies or biesx")
      ->check(CLI::IsMember({"bies", "biesx"}));
  train_cmd->add_flag("--unit-mode", train_args.unit_mode,
                      "treat space-delimited syllables as base units");

  std::string decode_model, decode_input, decode_out;
  CLI::App* decode_cmd = app.add_subcommand("decode", "Segment raw text with one model");
  decode_cmd->add_option("model", decode_model, "checkpoint path")->required();
  decode_cmd->add_option("input", decode_input, "raw text, one sentence per line")
      ->required()
      ->check(CLI::ExistingFile);
  decode_cmd->add_option("--out", decode_out, "output path (default stdout)");

  std::string ens_input, ens_out;
  std::vector<std::string> ens_models;
  CLI::App* ens_cmd =
      app.add_subcommand("ensemble-decode", "Segment raw text with averaged model scores");
  ens_cmd->add_option("input", ens_input, "raw text, one sentence per line")
      ->required()
      ->check(CLI::ExistingFile);
  ens_cmd->add_option("models", ens_models, "two or more checkpoint paths")
      ->required()
      ->expected(2, -1);
  ens_cmd->add_option("--out", ens_out, "output path (default stdout)");

  std::string eval_level = "word", eval_gold, eval_pred, eval_diff;
  bool eval_unit_mode = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a prediction against gold");
  eval_cmd->add_option("gold", eval_gold, "gold corpus")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("pred", eval_pred, "predicted corpus")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--level", eval_level, "word, morph, or affix")
      ->check(CLI::IsMember({"word", "morph", "affix"}));
  eval_cmd->add_flag("--unit-mode", eval_unit_mode, "parse word files in unit mode");
  eval_cmd->add_option("--diff", eval_diff, "write a per-sentence TSV report here");

  std::string inspect_model;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "Dump checkpoint metadata");
  inspect_cmd->add_option("model", inspect_model, "checkpoint path")->required();

  std::reverse(args.begin(), args.end());  // CLI11 consumes args back to front
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*train_cmd) {
      train_args.seed_given = seed_opt->count() > 0;
      if (!seeds_text.empty()) {
        for (const std::string& piece : split(seeds_text, ",")) {
          if (piece.empty()) fail(ErrorCode::UsageError, "empty entry in --seeds");
          train_args.seeds.push_back(std::stoull(piece));
        }
      }
      return run_train(train_args, out);
    }
    if (*decode_cmd) {
      const std::vector<Checkpoint> models = load_models({decode_model});
      write_lines(decode_lines(models, read_lines(decode_input)), decode_out, out);
      return 0;
    }
    if (*ens_cmd) {
      const std::vector<Checkpoint> models = load_models(ens_models);
      write_lines(decode_lines(models, read_lines(ens_input)), ens_out, out);
      return 0;
    }
    if (*eval_cmd) {
      return run_eval(eval_level, eval_gold, eval_pred, eval_unit_mode, eval_diff, out);
    }
    if (*inspect_cmd) return run_inspect(inspect_model, out);
  } catch (const Error& e) {
    err << "seqseg: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "seqseg: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace seqseg::cli
