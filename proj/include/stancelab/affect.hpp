// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stancelab/corpus.hpp"

namespace stancelab {

enum class SentimentLabel : int { kNegative = 0, kNeutral = 1, kPositive = 2 };
inline constexpr int kSentimentClasses = 3;

/// Emotion indices. The order doubles as the tie-break priority for words
/// tagged with several emotions; kNeutral is the extra row for untagged words.
enum class Emotion : int {
  kAnger = 0,
  kAnticipation = 1,
  kDisgust = 2,
  kFear = 3,
  kJoy = 4,
  kSadness = 5,
  kSurprise = 6,
  kTrust = 7,
  kNeutral = 8,
};
inline constexpr int kEmotionClasses = 9;

std::string_view to_string(SentimentLabel label);
std::string_view to_string(Emotion emotion);
std::optional<Emotion> parse_emotion(std::string_view name);

class SentimentLexicon {
 public:
  SentimentLexicon() = default;

  /// Inserts or replaces; the key is lowercased.
  void set(std::string_view word, double valence);
  std::optional<double> lookup(std::string_view word) const;
  bool contains(std::string_view word) const { return lookup(word).has_value(); }
  std::size_t size() const { return valence_.size(); }

 private:
  std::unordered_map<std::string, double> valence_;
};

/// Tab-separated rows: token, mean valence, ignored extra columns.
SentimentLexicon load_sentiment_lexicon(const std::filesystem::path& path);
SentimentLexicon parse_sentiment_lexicon(std::istream& in, std::string_view source = "<stream>");

class EmotionLexicon {
 public:
  void add(std::string_view word, Emotion emotion);
  /// Bitmask over the eight emotions (bit i = Emotion(i)); 0 when absent.
  std::uint8_t lookup(std::string_view word) const;
  std::size_t size() const { return tags_.size(); }
  std::size_t tag_count() const;
  const std::unordered_map<std::string, std::uint8_t>& entries() const { return tags_; }

 private:
  std::unordered_map<std::string, std::uint8_t> tags_;
};

/// Word-level NRC layout: word, category, flag. Only flag=1 rows of the eight
/// emotion categories are kept; polarity rows are ignored.
EmotionLexicon load_emotion_lexicon(const std::filesystem::path& path);
EmotionLexicon parse_emotion_lexicon(std::istream& in, std::string_view source = "<stream>");

/// Rule-based compound polarity of one sentence, in [-1, 1]. Operates on raw
/// text because capitalisation and punctuation carry signal.
double compound_score(std::string_view sentence, const SentimentLexicon& lexicon);
/// Token overload: tokens are joined with single spaces.
double compound_score(std::span<const std::string> sentence_tokens, const SentimentLexicon& lexicon);

SentimentLabel label_from_score(double score);

struct AffectAnnotation {
  std::vector<SentimentLabel> sentiment_labels;  // one per word
  std::vector<Emotion> emotion_labels;           // one per word
  std::vector<double> sentence_scores;           // one per sentence
};

struct SentimentAnnotation {
  std::vector<double> sentence_scores;
  std::vector<SentimentLabel> labels;
};

SentimentAnnotation annotate_sentiment(const TokenizedInstance& instance,
                                       const SentimentLexicon& lexicon);

Emotion emotion_for(std::string_view word, const EmotionLexicon& lexicon);
std::vector<Emotion> annotate_emotion(std::span<const std::string> tokens,
                                      const EmotionLexicon& lexicon);

/// Both annotations over the instance's word sequence. Either lexicon may be null.
AffectAnnotation annotate(const TokenizedInstance& instance, const SentimentLexicon* sentiment,
                          const EmotionLexicon* emotion);

}  // namespace stancelab
