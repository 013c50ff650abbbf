// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stancelab {

enum class Stance : int { kPro = 0, kCon = 1 };
enum class Split : int { kTrain = 0, kDev = 1, kTest = 2 };

std::string_view to_string(Stance stance);
std::string_view to_string(Split split);
// Case-insensitive; surrounding whitespace ignored.
std::optional<Stance> parse_stance(std::string_view text);
std::optional<Split> parse_split(std::string_view text);

/// One question/perspective pair with its gold stance.
struct Instance {
  std::string id;
  std::string topic;
  std::string question;
  std::string perspective;
  Stance stance = Stance::kPro;
  Split split = Split::kTrain;

  friend bool operator==(const Instance&, const Instance&) = default;
};

using Corpus = std::vector<Instance>;

/// Half-open range [begin, end) over either characters or tokens.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct Sentence {
  Span tokens;       // over the instance's word sequence
  std::string text;  // raw sentence text, trimmed
};

/// Words of question followed by words of perspective, segmented into sentences.
/// Question sentences come first; `sentences` partitions [0, words().size()).
struct TokenizedInstance {
  Instance instance;
  std::vector<std::string> question_tokens;
  std::vector<std::string> perspective_tokens;
  std::vector<Sentence> sentences;

  std::vector<std::string> words() const;
  std::size_t word_count() const { return question_tokens.size() + perspective_tokens.size(); }
};

struct SplitStats {
  Split split = Split::kTrain;
  std::size_t n_topics = 0;
  std::size_t avg_words = 0;
  std::size_t n_pro = 0;
  std::size_t n_con = 0;
  std::size_t total = 0;
};

enum class CorpusFormat { kJsonl, kCsv, kTsv };

/// Column names used when ingesting delimiter-separated files with a header row.
struct ColumnMap {
  std::string id = "id";
  std::string topic = "topic";
  std::string question = "question";
  std::string perspective = "perspective";
  std::string stance = "stance";
  std::string split = "split";
};

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format = CorpusFormat::kJsonl,
                   const ColumnMap& columns = {});
Corpus parse_jsonl_corpus(std::istream& in, std::string_view source_name = "<stream>");
Corpus parse_delimited_corpus(std::istream& in, char delimiter, const ColumnMap& columns = {},
                              std::string_view source_name = "<stream>");
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);
void write_corpus(std::ostream& out, const Corpus& corpus);

std::vector<std::string> tokenize(std::string_view text);

/// Character spans of sentences. Spans are contiguous and cover the text; each
/// ends after a terminator run (. ! ?) plus trailing whitespace.
std::vector<Span> split_sentences(std::string_view text);
const std::vector<std::string_view>& abbreviations();

TokenizedInstance tokenize_instance(const Instance& instance);

std::vector<SplitStats> corpus_stats(const Corpus& corpus);

struct FixtureOptions {
  std::uint64_t seed = 7;
  std::size_t n_instances = 100;
  double affect_signal_strength = 1.0;
  // Planted vocabulary. Empty means the built-in short lists.
  std::vector<std::string> positive_words;
  std::vector<std::string> negative_words;
  std::size_t planted_per_instance = 2;
  std::size_t filler_sentences = 3;
  double dev_fraction = 0.15;
  double test_fraction = 0.15;
};

/// Synthetic corpus whose stance is carried by planted sentiment words.
Corpus make_fixture(const FixtureOptions& options);
Corpus make_fixture(std::uint64_t seed, std::size_t n_instances, double affect_signal_strength);

const std::vector<std::string>& fixture_positive_words();
const std::vector<std::string>& fixture_negative_words();
const std::vector<std::string>& fixture_filler_words();

}  // namespace stancelab
