#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>

#include "seqseg/corpus.hpp"
#include "seqseg/error.hpp"

namespace seqseg {

// Training hyper-parameters. The defaults are the stock configuration;
// a config file or command-line flags may override individual fields.
struct TrainConfig {
  int char_vec = 50;       // unigram vector size
  int ngram_vecs = 50;     // bigram/trigram vector sizes
  int state = 200;         // GRU state size
  double lr0 = 0.1;        // initial Adagrad learning rate
  double decay = 0.05;     // learning-rate decay per epoch
  double clip = 5.0;       // global gradient-norm threshold
  double dropout = 0.5;    // dropout rate on inputs and encoder outputs
  int batch = 10;          // sentences per mini-batch
  int length_limit = 300;  // chop streams longer than this
  int epochs = 30;
  int min_best_epoch = 5;  // earliest epoch eligible for model selection
  std::uint64_t seed = 1;
  TagScheme scheme{TagKind::BIES};
  bool unit_mode = false;

  bool operator==(const TrainConfig&) const = default;
};

inline void apply_config_entry(TrainConfig& config, std::string_view key,
                               const std::string& value) {
  try {
    if (key == "char_vec") config.char_vec = std::stoi(value);
    else if (key == "ngram_vecs") config.ngram_vecs = std::stoi(value);
    else if (key == "state") config.state = std::stoi(value);
    else if (key == "lr0") config.lr0 = std::stod(value);
    else if (key == "decay") config.decay = std::stod(value);
    else if (key == "clip") config.clip = std::stod(value);
    else if (key == "dropout") config.dropout = std::stod(value);
    else if (key == "batch") config.batch = std::stoi(value);
    else if (key == "length_limit") config.length_limit = std::stoi(value);
    else if (key == "epochs") config.epochs = std::stoi(value);
    else if (key == "min_best_epoch") config.min_best_epoch = std::stoi(value);
    else if (key == "seed") config.seed = std::stoull(value);
    else if (key == "scheme") {
      if (value == "bies") config.scheme = TagScheme{TagKind::BIES};
      else if (value == "biesx") config.scheme = TagScheme{TagKind::BIESX};
      else fail(ErrorCode::UsageError, "unknown scheme '" + value + "'");
    } else if (key == "unit_mode") {
      if (value == "true" || value == "1") config.unit_mode = true;
      else if (value == "false" || value == "0") config.unit_mode = false;
      else fail(ErrorCode::UsageError, "unit_mode must be true or false");
    } else {
      fail(ErrorCode::UsageError, "unknown config key '" + std::string(key) + "'");
    }
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::UsageError,
         "bad value '" + value + "' for config key '" + std::string(key) + "'");
  } catch (const std::out_of_range&) {
    fail(ErrorCode::UsageError,
         "value '" + value + "' out of range for config key '" + std::string(key) + "'");
  }
}

// Flat key=value file mirroring the TrainConfig field names. Blank lines and
// lines starting with '#' are skipped.
inline TrainConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open config file '" + path + "'");
  TrainConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line) || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::UsageError,
           path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    apply_config_entry(config, std::string_view(line).substr(0, eq),
                       line.substr(eq + 1));
  }
  return config;
}

}  // namespace seqseg
