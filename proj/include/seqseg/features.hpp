#pragma once

#include <Eigen/Dense>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqseg/error.hpp"

namespace seqseg {

struct NgramIds {
  int uni = 0;
  int bi = 0;
  int tri = 0;
};

// Dense id maps for unigrams, bigrams and trigrams over unit streams, with
// the singleton policy: an n-gram seen once in training shares the order's
// UNK id, which also covers anything unseen at inference time. Ids 0 and 1
// of every order are reserved for the pad and unknown symbols; entries start
// at 2 in first-occurrence order, so construction is reproducible.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kFirstEntryId = 2;

  Vocabulary() = default;

  Vocabulary(std::vector<std::string> uni_entries, std::vector<std::string> bi_entries,
             std::vector<std::string> tri_entries)
      : uni_entries_(std::move(uni_entries)),
        bi_entries_(std::move(bi_entries)),
        tri_entries_(std::move(tri_entries)) {
    index(uni_entries_, uni_ids_);
    index(bi_entries_, bi_ids_);
    index(tri_entries_, tri_ids_);
  }

  static Vocabulary build(const std::vector<std::vector<std::string>>& streams) {
    std::size_t positions = 0;
    for (const auto& stream : streams) positions += stream.size();
    if (positions == 0) fail(ErrorCode::EmptyCorpus, "no units in the training corpus");

    std::unordered_map<std::string, int> uni_count, bi_count, tri_count;
    for (const auto& stream : streams) {
      for (std::size_t i = 0; i < stream.size(); ++i) {
        ++uni_count[uni_key(stream, i)];
        ++bi_count[bi_key(stream, i)];
        ++tri_count[tri_key(stream, i)];
      }
    }
    Vocabulary v;
    for (const auto& stream : streams) {
      for (std::size_t i = 0; i < stream.size(); ++i) {
        admit(uni_key(stream, i), uni_count, v.uni_entries_, v.uni_ids_);
        admit(bi_key(stream, i), bi_count, v.bi_entries_, v.bi_ids_);
        admit(tri_key(stream, i), tri_count, v.tri_entries_, v.tri_ids_);
      }
    }
    return v;
  }

  // (u_i, (u_{i-1}, u_i), (u_{i-1}, u_i, u_{i+1})) with pad symbols standing
  // in for out-of-range neighbours.
  NgramIds context_ids(const std::vector<std::string>& units, std::size_t i) const {
    if (i >= units.size()) {
      fail(ErrorCode::IndexOutOfRange,
           "position " + std::to_string(i) + " in a stream of " +
               std::to_string(units.size()) + " units");
    }
    return {lookup(uni_ids_, uni_key(units, i)), lookup(bi_ids_, bi_key(units, i)),
            lookup(tri_ids_, tri_key(units, i))};
  }

  int uni_size() const { return kFirstEntryId + static_cast<int>(uni_entries_.size()); }
  int bi_size() const { return kFirstEntryId + static_cast<int>(bi_entries_.size()); }
  int tri_size() const { return kFirstEntryId + static_cast<int>(tri_entries_.size()); }

  // Entries in id order (entry k has id kFirstEntryId + k).
  const std::vector<std::string>& uni_entries() const { return uni_entries_; }
  const std::vector<std::string>& bi_entries() const { return bi_entries_; }
  const std::vector<std::string>& tri_entries() const { return tri_entries_; }

  bool operator==(const Vocabulary& other) const {
    return uni_entries_ == other.uni_entries_ && bi_entries_ == other.bi_entries_ &&
           tri_entries_ == other.tri_entries_;
  }

 private:
  // Key separator and pad marker are control bytes that cannot collide with
  // code points produced by the corpus parsers.
  static constexpr char kSep = '\x1f';
  static inline const std::string kPadMark = "\x01";

  static std::string uni_key(const std::vector<std::string>& units, std::size_t i) {
    return units[i];
  }
  static std::string bi_key(const std::vector<std::string>& units, std::size_t i) {
    return (i > 0 ? units[i - 1] : kPadMark) + kSep + units[i];
  }
  static std::string tri_key(const std::vector<std::string>& units, std::size_t i) {
    return (i > 0 ? units[i - 1] : kPadMark) + kSep + units[i] + kSep +
           (i + 1 < units.size() ? units[i + 1] : kPadMark);
  }

  static void admit(const std::string& key,
                    const std::unordered_map<std::string, int>& counts,
                    std::vector<std::string>& entries,
                    std::unordered_map<std::string, int>& ids) {
    if (counts.at(key) < 2 || ids.contains(key)) return;
    ids.emplace(key, kFirstEntryId + static_cast<int>(entries.size()));
    entries.push_back(key);
  }

  static void index(const std::vector<std::string>& entries,
                    std::unordered_map<std::string, int>& ids) {
    for (std::size_t k = 0; k < entries.size(); ++k) {
      ids.emplace(entries[k], kFirstEntryId + static_cast<int>(k));
    }
  }

  static int lookup(const std::unordered_map<std::string, int>& ids, const std::string& key) {
    auto it = ids.find(key);
    return it == ids.end() ? kUnkId : it->second;
  }

  std::vector<std::string> uni_entries_, bi_entries_, tri_entries_;
  std::unordered_map<std::string, int> uni_ids_, bi_ids_, tri_ids_;
};

// Trainable lookup tables, one row per vocabulary id.
struct EmbeddingTables {
  Eigen::MatrixXd uni;
  Eigen::MatrixXd bi;
  Eigen::MatrixXd tri;
};

inline Eigen::VectorXd embed(const NgramIds& ids, const EmbeddingTables& tables) {
  if (ids.uni < 0 || ids.uni >= tables.uni.rows() || ids.bi < 0 ||
      ids.bi >= tables.bi.rows() || ids.tri < 0 || ids.tri >= tables.tri.rows()) {
    fail(ErrorCode::IdOutOfRange, "embedding id outside table");
  }
  Eigen::VectorXd out(tables.uni.cols() + tables.bi.cols() + tables.tri.cols());
  out << tables.uni.row(ids.uni).transpose(), tables.bi.row(ids.bi).transpose(),
      tables.tri.row(ids.tri).transpose();
  return out;
}

// Per-position context ids for a whole stream.
struct EncodedStream {
  std::vector<int> uni;
  std::vector<int> bi;
  std::vector<int> tri;

  std::size_t size() const { return uni.size(); }
};

inline EncodedStream encode_stream(const std::vector<std::string>& units,
                                   const Vocabulary& vocab) {
  EncodedStream out;
  out.uni.reserve(units.size());
  out.bi.reserve(units.size());
  out.tri.reserve(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    const NgramIds ids = vocab.context_ids(units, i);
    out.uni.push_back(ids.uni);
    out.bi.push_back(ids.bi);
    out.tri.push_back(ids.tri);
  }
  return out;
}

inline EncodedStream slice(const EncodedStream& stream, std::size_t begin, std::size_t end) {
  EncodedStream out;
  out.uni.assign(stream.uni.begin() + static_cast<std::ptrdiff_t>(begin),
                 stream.uni.begin() + static_cast<std::ptrdiff_t>(end));
  out.bi.assign(stream.bi.begin() + static_cast<std::ptrdiff_t>(begin),
                stream.bi.begin() + static_cast<std::ptrdiff_t>(end));
  out.tri.assign(stream.tri.begin() + static_cast<std::ptrdiff_t>(begin),
                 stream.tri.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

// Rows of input features for one stream: concat(uni, bi, tri) per position.
inline Eigen::MatrixXd embed_stream(const EncodedStream& stream, const EmbeddingTables& tables) {
  const auto d_uni = tables.uni.cols();
  const auto d_bi = tables.bi.cols();
  const auto d_tri = tables.tri.cols();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(stream.size()), d_uni + d_bi + d_tri);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (stream.uni[i] < 0 || stream.uni[i] >= tables.uni.rows() || stream.bi[i] < 0 ||
        stream.bi[i] >= tables.bi.rows() || stream.tri[i] < 0 ||
        stream.tri[i] >= tables.tri.rows()) {
      fail(ErrorCode::IdOutOfRange, "embedding id outside table");
    }
    out.block(row, 0, 1, d_uni) = tables.uni.row(stream.uni[i]);
    out.block(row, d_uni, 1, d_bi) = tables.bi.row(stream.bi[i]);
    out.block(row, d_uni + d_bi, 1, d_tri) = tables.tri.row(stream.tri[i]);
  }
  return out;
}

}  // namespace seqseg
