// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace stancelab {

using MatrixF32 = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::array<char, 8> kEmbeddingMagic = {'S', 'T', 'N', 'C', 'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::int32_t kSpecialToken = -1;

/// Contextual token states of one instance.
struct EmbeddingRecord {
  std::string instance_id;
  std::vector<std::string> tokens;
  std::vector<std::int32_t> word_alignment;  // source word per token; -1 for special tokens
  MatrixF32 matrix;                          // tokens.size() x dim

  std::size_t length() const { return tokens.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(matrix.cols()); }
};

struct EmbeddingFileHeader {
  std::uint32_t version = kEmbeddingVersion;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
};

/// Checks record-level invariants; throws DataError naming the record.
void validate_record(const EmbeddingRecord& record);

/// Layout (little-endian): magic[8] version:u32 dim:u32 count:u64, then per record
/// id_len:u32 id, T:u32, T x (len:u32 bytes), T x u32 alignment, T x dim f32 row-major.
/// `dim` is taken from the first record, or from `dim_if_empty` for zero records.
std::size_t write_embedding_file(const std::filesystem::path& path,
                                 const std::vector<EmbeddingRecord>& records,
                                 std::uint32_t dim_if_empty = 1);

/// Random access to an embedding file. `open` validates the whole file in one
/// pass and indexes record offsets; records are read on demand.
class EmbeddingStore {
 public:
  static EmbeddingStore open(const std::filesystem::path& path);

  const EmbeddingFileHeader& header() const { return header_; }
  std::size_t size() const { return order_.size(); }
  std::size_t dim() const { return header_.dim; }
  bool contains(std::string_view id) const;
  const std::vector<std::string>& ids() const { return order_; }
  /// Throws DataError listing the id when absent.
  EmbeddingRecord get(std::string_view id) const;

 private:
  std::filesystem::path path_;
  EmbeddingFileHeader header_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::uint64_t> offsets_;
};

std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path);

/// Token vocabulary for the trainable fallback table. Index 0 is reserved for
/// out-of-vocabulary tokens.
class Vocabulary {
 public:
  static constexpr std::int32_t kOov = 0;
  static constexpr std::string_view kOovToken = "<oov>";

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens_in_order);

  std::int32_t add(std::string_view token);
  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

enum class EmbeddingMode { kContextual, kFallback };

/// Token states for one sequence. Contextual matrices are frozen inputs;
/// fallback mode yields table row ids (rows are trainable network parameters).
struct SequenceEmbedding {
  std::vector<std::string> tokens;
  std::vector<std::int32_t> word_alignment;
  Eigen::MatrixXd context;              // contextual mode: T x d
  std::vector<std::int32_t> token_ids;  // fallback mode: T
};

SequenceEmbedding contextual_embedding(const EmbeddingStore& store, std::string_view id);
SequenceEmbedding fallback_embedding(const std::vector<std::string>& tokens,
                                     const std::vector<std::int32_t>& word_alignment,
                                     const Vocabulary& vocab);
/// Materialises fallback rows from a table (vocab x d) for inspection.
Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& table, const std::vector<std::int32_t>& ids);

}  // namespace stancelab
