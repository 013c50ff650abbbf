// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stancelab/log.hpp"
#include "stancelab/network.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return STANCELAB_DATA_DIR; }
inline std::filesystem::path test_dir() { return STANCELAB_TEST_DIR; }

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("stancelab-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    stancelab::set_warning_sink([this](const std::string& m) {
      std::lock_guard lock(mutex_);
      messages_.push_back(m);
    });
  }
  ~WarningCapture() {
    stancelab::set_warning_sink([](const std::string& m) { std::cerr << "warning: " << m << '\n'; });
  }
  std::vector<std::string> messages() const {
    std::lock_guard lock(mutex_);
    return messages_;
  }
  bool any_contains(const std::string& needle) const {
    for (const auto& m : messages()) {
      if (m.find(needle) != std::string::npos) return true;
    }
    return false;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> messages_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Random sequence for a tiny model: contextual rows or fallback ids plus random affect labels.
inline stancelab::SequenceInput random_sequence(std::mt19937_64& rng, const stancelab::ModelConfig& c,
                                                std::size_t t_len) {
  using namespace stancelab;
  SequenceInput in;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> snt(0, kSentimentClasses - 1), emo(0, kEmotionClasses - 1);
  for (std::size_t t = 0; t < t_len; ++t) {
    in.tokens.push_back("w" + std::to_string(t));
    in.word_alignment.push_back(static_cast<std::int32_t>(t));
    in.sentiment.push_back(static_cast<SentimentLabel>(snt(rng)));
    in.emotion.push_back(static_cast<Emotion>(emo(rng)));
  }
  if (c.fallback_vocab > 0) {
    std::uniform_int_distribution<std::int32_t> id(0, static_cast<std::int32_t>(c.fallback_vocab) - 1);
    for (std::size_t t = 0; t < t_len; ++t) in.token_ids.push_back(id(rng));
  } else {
    in.context.resize(static_cast<Eigen::Index>(t_len), static_cast<Eigen::Index>(c.d_context));
    for (Eigen::Index i = 0; i < in.context.size(); ++i) in.context.data()[i] = u(rng);
  }
  return in;
}

inline stancelab::Example random_example(std::mt19937_64& rng, const stancelab::ModelConfig& c,
                                         std::size_t t_len, bool with_question) {
  stancelab::Example ex;
  ex.id = "ex";
  ex.input = random_sequence(rng, c, t_len);
  ex.gold = (rng() & 1) ? stancelab::Stance::kPro : stancelab::Stance::kCon;
  ex.question_end = t_len / 2;
  if (with_question) ex.question_only = random_sequence(rng, c, std::max<std::size_t>(1, t_len / 2));
  return ex;
}

inline stancelab::ModelConfig tiny_config(std::size_t d, std::size_t h, bool sentiment, bool emotion,
                                          bool bidirectional, std::uint64_t seed) {
  stancelab::ModelConfig c;
  c.d_context = d;
  c.hidden = h;
  c.affect_dim = d;
  c.sentiment_mode = sentiment;
  c.emotion_mode = emotion;
  c.bidirectional = bidirectional;
  c.seed = seed;
  return c;
}

}  // namespace testing
