// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "stancelab/error.hpp"

// Little-endian primitive encoding shared by the embedding and checkpoint formats.
namespace stancelab::binio {

template <typename T>
T byteswap_if_big(T value) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return value;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
}

template <typename T>
void put(std::ostream& out, T value) {
  value = byteswap_if_big(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline void put_string(std::ostream& out, std::string_view s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

/// Reader that tracks its byte offset and reports truncation with it.
class Reader {
 public:
  Reader(std::istream& in, std::string source, std::uint64_t offset = 0)
      : in_(in), source_(std::move(source)), offset_(offset) {}

  template <typename T>
  T get(const char* what) {
    T value;
    read_bytes(reinterpret_cast<char*>(&value), sizeof(T), what);
    return byteswap_if_big(value);
  }

  std::string get_string(const char* what, std::uint64_t max_len) {
    const auto len = get<std::uint32_t>(what);
    if (len > max_len) {
      throw DataError(source_ + ": implausible " + what + " length " + std::to_string(len) +
                      " at byte offset " + std::to_string(offset_ - 4));
    }
    std::string s(len, '\0');
    read_bytes(s.data(), len, what);
    return s;
  }

  void read_bytes(char* dst, std::uint64_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::uint64_t>(in_.gcount()) != n) {
      throw DataError(source_ + ": truncated while reading " + what + " at byte offset " +
                      std::to_string(offset_ + static_cast<std::uint64_t>(in_.gcount())));
    }
    offset_ += n;
  }

  void skip(std::uint64_t n, std::uint64_t file_size, const char* what) {
    if (offset_ + n > file_size) {
      throw DataError(source_ + ": truncated while reading " + what + " at byte offset " +
                      std::to_string(file_size));
    }
    in_.seekg(static_cast<std::streamoff>(offset_ + n));
    offset_ += n;
  }

  std::uint64_t offset() const { return offset_; }
  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
  std::uint64_t offset_;
};

}  // namespace stancelab::binio
