// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#include "stancelab/embeddings.hpp"

#include <cmath>
#include <fstream>

#include "stancelab/binary_io.hpp"
#include "stancelab/error.hpp"

namespace stancelab {

namespace {

constexpr std::uint64_t kMaxStringBytes = 1u << 20;
constexpr std::uint64_t kMaxTokens = 1u << 24;

void write_record(std::ostream& out, const EmbeddingRecord& r) {
  binio::put_string(out, r.instance_id);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(r.tokens.size()));
  for (const auto& t : r.tokens) binio::put_string(out, t);
  for (const auto a : r.word_alignment) binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(a));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(r.matrix.data()),
              static_cast<std::streamsize>(r.matrix.size() * sizeof(float)));
  } else {
    for (Eigen::Index i = 0; i < r.matrix.size(); ++i) binio::put<float>(out, r.matrix.data()[i]);
  }
}

EmbeddingRecord read_record(binio::Reader& rd, std::uint32_t dim) {
  EmbeddingRecord r;
  r.instance_id = rd.get_string("instance id", kMaxStringBytes);
  const auto t = rd.get<std::uint32_t>("token count");
  if (t > kMaxTokens) {
    throw DataError(rd.source() + ": implausible token count " + std::to_string(t) +
                    " for record '" + r.instance_id + "'");
  }
  r.tokens.reserve(t);
  for (std::uint32_t i = 0; i < t; ++i) r.tokens.push_back(rd.get_string("token", kMaxStringBytes));
  r.word_alignment.resize(t);
  for (std::uint32_t i = 0; i < t; ++i) {
    r.word_alignment[i] = static_cast<std::int32_t>(rd.get<std::uint32_t>("alignment"));
  }
  r.matrix.resize(t, dim);
  rd.read_bytes(reinterpret_cast<char*>(r.matrix.data()),
                static_cast<std::uint64_t>(t) * dim * sizeof(float), "matrix");
  if constexpr (std::endian::native != std::endian::little) {
    for (Eigen::Index i = 0; i < r.matrix.size(); ++i) {
      r.matrix.data()[i] = binio::byteswap_if_big(r.matrix.data()[i]);
    }
  }
  return r;
}

EmbeddingFileHeader read_header(binio::Reader& rd) {
  std::array<char, 8> magic{};
  try {
    rd.read_bytes(magic.data(), magic.size(), "magic");
  } catch (const DataError&) {
    throw DataError(rd.source() + ": not an embedding file");
  }
  if (magic != kEmbeddingMagic) throw DataError(rd.source() + ": not an embedding file");
  EmbeddingFileHeader h;
  h.version = rd.get<std::uint32_t>("version");
  if (h.version != kEmbeddingVersion) {
    throw DataError(rd.source() + ": unsupported embedding file version " +
                    std::to_string(h.version));
  }
  h.dim = rd.get<std::uint32_t>("dim");
  h.count = rd.get<std::uint64_t>("count");
  if (h.dim == 0) throw DataError(rd.source() + ": dim must be positive");
  return h;
}

}  // namespace

void validate_record(const EmbeddingRecord& r) {
  const auto t = static_cast<Eigen::Index>(r.tokens.size());
  if (r.instance_id.empty()) throw DataError("embedding record with empty instance id");
  if (r.matrix.rows() != t || r.word_alignment.size() != r.tokens.size()) {
    throw DataError("embedding record '" + r.instance_id + "': matrix rows, tokens and alignment "
                    "lengths differ");
  }
  std::int32_t last = -1;
  for (const auto a : r.word_alignment) {
    if (a == kSpecialToken) continue;
    if (a < 0 || a < last) {
      throw DataError("embedding record '" + r.instance_id + "': word alignment must be "
                      "non-decreasing (special tokens excepted)");
    }
    last = a;
  }
  if (!r.matrix.allFinite()) {
    throw DataError("embedding record '" + r.instance_id + "': non-finite values");
  }
}

std::size_t write_embedding_file(const std::filesystem::path& path,
                                 const std::vector<EmbeddingRecord>& records,
                                 std::uint32_t dim_if_empty) {
  const std::uint32_t dim =
      records.empty() ? dim_if_empty : static_cast<std::uint32_t>(records.front().dim());
  if (dim == 0) throw DataError("embedding dim must be positive");
  for (const auto& r : records) {
    if (r.dim() != dim) {
      throw DataError("embedding record '" + r.instance_id + "' has dim " +
                      std::to_string(r.dim()) + ", expected " + std::to_string(dim));
    }
    validate_record(r);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write embedding file " + path.string());
  out.write(kEmbeddingMagic.data(), kEmbeddingMagic.size());
  binio::put<std::uint32_t>(out, kEmbeddingVersion);
  binio::put<std::uint32_t>(out, dim);
  binio::put<std::uint64_t>(out, records.size());
  for (const auto& r : records) write_record(out, r);
  out.flush();
  if (!out) throw DataError("failed writing embedding file " + path.string());
  return records.size();
}

EmbeddingStore EmbeddingStore::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file " + path.string());
  std::error_code ec;
  const std::uint64_t file_size = std::filesystem::file_size(path, ec);
  if (ec) throw DataError("cannot stat embedding file " + path.string());

  EmbeddingStore store;
  store.path_ = path;
  binio::Reader rd(in, path.string());
  store.header_ = read_header(rd);
  for (std::uint64_t k = 0; k < store.header_.count; ++k) {
    const std::uint64_t start = rd.offset();
    std::string id = rd.get_string("instance id", kMaxStringBytes);
    const auto t = rd.get<std::uint32_t>("token count");
    if (t > kMaxTokens) {
      throw DataError(path.string() + ": implausible token count for record '" + id + "'");
    }
    for (std::uint32_t i = 0; i < t; ++i) {
      const auto len = rd.get<std::uint32_t>("token length");
      rd.skip(len, file_size, "token");
    }
    rd.skip(static_cast<std::uint64_t>(t) * 4, file_size, "alignment");
    rd.skip(static_cast<std::uint64_t>(t) * store.header_.dim * sizeof(float), file_size, "matrix");
    if (!store.offsets_.emplace(id, start).second) {
      throw DataError(path.string() + ": duplicate instance id '" + id + "'");
    }
    store.order_.push_back(std::move(id));
  }
  if (rd.offset() != file_size) {
    throw DataError(path.string() + ": " + std::to_string(file_size - rd.offset()) +
                    " trailing bytes after " + std::to_string(store.header_.count) +
                    " records at byte offset " + std::to_string(rd.offset()));
  }
  return store;
}

bool EmbeddingStore::contains(std::string_view id) const {
  return offsets_.find(std::string(id)) != offsets_.end();
}

EmbeddingRecord EmbeddingStore::get(std::string_view id) const {
  auto it = offsets_.find(std::string(id));
  if (it == offsets_.end()) {
    throw DataError("instance id '" + std::string(id) + "' not found in embedding file " +
                    path_.string());
  }
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw DataError("cannot reopen embedding file " + path_.string());
  in.seekg(static_cast<std::streamoff>(it->second));
  binio::Reader rd(in, path_.string(), it->second);
  auto record = read_record(rd, header_.dim);
  validate_record(record);
  return record;
}

std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path) {
  const auto store = EmbeddingStore::open(path);
  std::vector<EmbeddingRecord> out;
  out.reserve(store.size());
  for (const auto& id : store.ids()) out.push_back(store.get(id));
  return out;
}

Vocabulary::Vocabulary() {
  tokens_.emplace_back(kOovToken);
  index_.emplace(std::string(kOovToken), kOov);
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens_in_order) : Vocabulary() {
  for (const auto& t : tokens_in_order) {
    if (t != kOovToken) add(t);
  }
}

std::int32_t Vocabulary::add(std::string_view token) {
  auto [it, inserted] =
      index_.emplace(std::string(token), static_cast<std::int32_t>(tokens_.size()));
  if (inserted) tokens_.emplace_back(token);
  return it->second;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kOov : it->second;
}

SequenceEmbedding contextual_embedding(const EmbeddingStore& store, std::string_view id) {
  auto record = store.get(id);
  SequenceEmbedding out;
  out.tokens = std::move(record.tokens);
  out.word_alignment = std::move(record.word_alignment);
  out.context = record.matrix.cast<double>();
  return out;
}

SequenceEmbedding fallback_embedding(const std::vector<std::string>& tokens,
                                     const std::vector<std::int32_t>& word_alignment,
                                     const Vocabulary& vocab) {
  SequenceEmbedding out;
  out.tokens = tokens;
  out.word_alignment = word_alignment;
  out.token_ids.reserve(tokens.size());
  for (const auto& t : tokens) out.token_ids.push_back(vocab.id(t));
  return out;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& table, const std::vector<std::int32_t>& ids) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  return out;
}

}  // namespace stancelab
