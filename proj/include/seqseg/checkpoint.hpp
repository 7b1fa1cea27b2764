#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>

#include "seqseg/config.hpp"
#include "seqseg/error.hpp"
#include "seqseg/features.hpp"
#include "seqseg/recurrent.hpp"

namespace seqseg {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointMagic = "SEQSEGCP";

// Self-contained model container: everything needed to decode, plus the
// selection metadata. Serialized as a versioned binary file with a magic
// header and length-prefixed named sections; all reals are little-endian
// 64-bit, so a round trip is bit-exact.
struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  TrainConfig config;
  Vocabulary vocab;
  ModelParameters params;
  int best_epoch = 0;
  double best_dev_f1 = 0.0;
};

namespace detail {

inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

inline void put_i64(std::string& out, std::int64_t v) {
  put_u64(out, static_cast<std::uint64_t>(v));
}

inline void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void put_str(std::string& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  bool done() const { return pos_ == data_.size(); }

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

  std::uint32_t u32() {
    std::string_view b = take(4);
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(k)]);
    return v;
  }

  std::uint64_t u64() {
    std::string_view b = take(8);
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(k)]);
    return v;
  }

  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::string str() {
    const std::uint32_t n = u32();
    return std::string(take(n));
  }

  std::string_view take(std::size_t n) {
    if (pos_ + n > data_.size()) fail(ErrorCode::CorruptFile, "truncated checkpoint data");
    std::string_view out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::string encode_config(const TrainConfig& c) {
  std::string out;
  put_i64(out, c.char_vec);
  put_i64(out, c.ngram_vecs);
  put_i64(out, c.state);
  put_f64(out, c.lr0);
  put_f64(out, c.decay);
  put_f64(out, c.clip);
  put_f64(out, c.dropout);
  put_i64(out, c.batch);
  put_i64(out, c.length_limit);
  put_i64(out, c.epochs);
  put_i64(out, c.min_best_epoch);
  put_u64(out, c.seed);
  put_u8(out, c.scheme.kind == TagKind::BIESX ? 1 : 0);
  put_u8(out, c.unit_mode ? 1 : 0);
  return out;
}

inline TrainConfig decode_config(Reader& r) {
  TrainConfig c;
  c.char_vec = static_cast<int>(r.i64());
  c.ngram_vecs = static_cast<int>(r.i64());
  c.state = static_cast<int>(r.i64());
  c.lr0 = r.f64();
  c.decay = r.f64();
  c.clip = r.f64();
  c.dropout = r.f64();
  c.batch = static_cast<int>(r.i64());
  c.length_limit = static_cast<int>(r.i64());
  c.epochs = static_cast<int>(r.i64());
  c.min_best_epoch = static_cast<int>(r.i64());
  c.seed = r.u64();
  c.scheme = TagScheme{r.u8() == 1 ? TagKind::BIESX : TagKind::BIES};
  c.unit_mode = r.u8() == 1;
  return c;
}

inline std::string encode_vocab(const Vocabulary& v) {
  std::string out;
  for (const auto* entries : {&v.uni_entries(), &v.bi_entries(), &v.tri_entries()}) {
    put_u64(out, entries->size());
    for (const std::string& e : *entries) put_str(out, e);
  }
  return out;
}

inline Vocabulary decode_vocab(Reader& r) {
  std::vector<std::string> lists[3];
  for (auto& list : lists) {
    const std::uint64_t n = r.u64();
    list.reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) list.push_back(r.str());
  }
  return Vocabulary(std::move(lists[0]), std::move(lists[1]), std::move(lists[2]));
}

inline std::string encode_params(const ModelParameters& p) {
  std::string out;
  std::uint32_t count = 0;
  for_each_array(p, [&](std::string_view, const auto&) { ++count; });
  put_u32(out, count);
  for_each_array(p, [&](std::string_view name, const auto& m) {
    put_str(out, name);
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index row = 0; row < m.rows(); ++row) {
      for (Eigen::Index col = 0; col < m.cols(); ++col) put_f64(out, m(row, col));
    }
  });
  return out;
}

inline void decode_params(Reader& r, ModelParameters& p) {
  std::map<std::string, Eigen::Index> expected_index;
  struct Slot {
    double* data;
    Eigen::Index rows, cols;
    bool filled = false;
  };
  std::vector<Slot> slots;
  for_each_array(p, [&](std::string_view name, auto& m) {
    expected_index.emplace(std::string(name), static_cast<Eigen::Index>(slots.size()));
    slots.push_back({m.data(), m.rows(), m.cols(), false});
  });

  const std::uint32_t count = r.u32();
  if (count != slots.size()) fail(ErrorCode::CorruptFile, "unexpected parameter array count");
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.str();
    auto it = expected_index.find(name);
    if (it == expected_index.end()) {
      fail(ErrorCode::CorruptFile, "unknown parameter array '" + name + "'");
    }
    Slot& slot = slots[static_cast<std::size_t>(it->second)];
    if (slot.filled) fail(ErrorCode::CorruptFile, "duplicate parameter array '" + name + "'");
    const auto rows = static_cast<Eigen::Index>(r.u64());
    const auto cols = static_cast<Eigen::Index>(r.u64());
    if (rows != slot.rows || cols != slot.cols) {
      fail(ErrorCode::CorruptFile, "parameter array '" + name + "' has unexpected shape");
    }
    // Eigen storage is column-major; fill through the same row-major walk
    // used by the writer.
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>> m(slot.data, rows, cols);
    for (Eigen::Index row = 0; row < rows; ++row) {
      for (Eigen::Index col = 0; col < cols; ++col) m(row, col) = r.f64();
    }
    slot.filled = true;
  }
}

}  // namespace detail

inline std::string save_checkpoint_bytes(const Checkpoint& c) {
  std::string out(kCheckpointMagic);
  detail::put_u32(out, c.format_version);
  auto section = [&](std::string_view name, const std::string& payload) {
    detail::put_str(out, name);
    detail::put_u64(out, payload.size());
    out.append(payload);
  };
  section("config", detail::encode_config(c.config));
  section("vocab", detail::encode_vocab(c.vocab));
  section("params", detail::encode_params(c.params));
  std::string meta;
  detail::put_i64(meta, c.best_epoch);
  detail::put_f64(meta, c.best_dev_f1);
  section("meta", meta);
  return out;
}

inline Checkpoint load_checkpoint_bytes(std::string_view data) {
  detail::Reader header(data);
  if (header.take(kCheckpointMagic.size()) != kCheckpointMagic) {
    fail(ErrorCode::CorruptFile, "bad magic bytes; not a checkpoint file");
  }
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::VersionMismatch,
         "checkpoint format version " + std::to_string(version) + "; this build reads " +
             std::to_string(kCheckpointVersion));
  }
  std::map<std::string, std::string> sections;
  while (!header.done()) {
    const std::string name = header.str();
    const std::uint64_t size = header.u64();
    if (!sections.emplace(name, std::string(header.take(size))).second) {
      fail(ErrorCode::CorruptFile, "duplicate section '" + name + "'");
    }
  }
  for (const char* required : {"config", "vocab", "params", "meta"}) {
    if (!sections.contains(required)) {
      fail(ErrorCode::CorruptFile, std::string("missing section '") + required + "'");
    }
  }

  Checkpoint c;
  c.format_version = version;
  detail::Reader config_reader(sections["config"]);
  c.config = detail::decode_config(config_reader);
  detail::Reader vocab_reader(sections["vocab"]);
  c.vocab = detail::decode_vocab(vocab_reader);

  ModelDims dims{.uni_rows = c.vocab.uni_size(),
                 .bi_rows = c.vocab.bi_size(),
                 .tri_rows = c.vocab.tri_size(),
                 .char_dim = c.config.char_vec,
                 .ngram_dim = c.config.ngram_vecs,
                 .state = c.config.state,
                 .tags = c.config.scheme.size()};
  c.params = zero_parameters(dims);
  detail::Reader params_reader(sections["params"]);
  detail::decode_params(params_reader, c.params);

  detail::Reader meta_reader(sections["meta"]);
  c.best_epoch = static_cast<int>(meta_reader.i64());
  c.best_dev_f1 = meta_reader.f64();
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  const std::string bytes = save_checkpoint_bytes(c);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoFailure, "failed writing '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::IoFailure, "failed reading '" + path.string() + "'");
  return load_checkpoint_bytes(bytes);
}

}  // namespace seqseg
