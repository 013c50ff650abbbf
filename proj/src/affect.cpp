// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#include "stancelab/affect.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "stancelab/error.hpp"
#include "stancelab/log.hpp"
#include "stancelab/text.hpp"

namespace stancelab {

std::string_view to_string(SentimentLabel label) {
  switch (label) {
    case SentimentLabel::kNegative: return "negative";
    case SentimentLabel::kNeutral: return "neutral";
    case SentimentLabel::kPositive: return "positive";
  }
  return "neutral";
}

namespace {
constexpr std::array<std::string_view, kEmotionClasses> kEmotionNames = {
    "anger", "anticipation", "disgust", "fear", "joy", "sadness", "surprise", "trust", "neutral"};
}  // namespace

std::string_view to_string(Emotion emotion) { return kEmotionNames[static_cast<int>(emotion)]; }

std::optional<Emotion> parse_emotion(std::string_view name) {
  const std::string lower = ascii_lower(trim(name));
  for (int i = 0; i < kEmotionClasses - 1; ++i) {
    if (kEmotionNames[i] == lower) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Lexicons

void SentimentLexicon::set(std::string_view word, double valence) {
  valence_[ascii_lower(word)] = valence;
}

std::optional<double> SentimentLexicon::lookup(std::string_view word) const {
  auto it = valence_.find(ascii_lower(word));
  if (it == valence_.end()) return std::nullopt;
  return it->second;
}

SentimentLexicon parse_sentiment_lexicon(std::istream& in, std::string_view source) {
  SentimentLexicon lex;
  // Keys are folded to lowercase. A row whose original key is already lowercase
  // takes precedence over a mixed-case row folding onto the same key (":d" vs ":D").
  std::unordered_set<std::string> from_lowercase;
  std::unordered_set<std::string> seen;
  std::size_t duplicates = 0;
  std::string first_duplicate;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto tab = row.find('\t');
    if (tab == std::string_view::npos) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) +
                      ": expected token<TAB>valence");
    }
    const std::string_view token = row.substr(0, tab);
    std::string_view rest = row.substr(tab + 1);
    rest = rest.substr(0, rest.find('\t'));
    double valence = 0.0;
    {
      std::string field(trim(rest));
      char* end = nullptr;
      valence = std::strtod(field.c_str(), &end);
      if (field.empty() || end != field.c_str() + field.size() || !std::isfinite(valence)) {
        throw DataError(std::string(source) + ":" + std::to_string(line_no) +
                        ": unparsable valence '" + field + "'");
      }
    }
    const std::string key = ascii_lower(token);
    const bool lowercase_origin = key == token;
    if (!seen.insert(key).second) {
      if (from_lowercase.contains(key) && !lowercase_origin) continue;
      if (duplicates++ == 0) {
        first_duplicate = "'" + std::string(token) + "' at line " + std::to_string(line_no);
      }
    }
    if (lowercase_origin) from_lowercase.insert(key);
    lex.set(key, valence);
  }
  if (duplicates > 0) {
    warn(std::string(source) + ": " + std::to_string(duplicates) +
         " duplicate tokens, last row wins (first: " + first_duplicate + ")");
  }
  if (lex.size() == 0) warn(std::string(source) + ": sentiment lexicon is empty");
  return lex;
}

SentimentLexicon load_sentiment_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open sentiment lexicon " + path.string());
  return parse_sentiment_lexicon(in, path.string());
}

void EmotionLexicon::add(std::string_view word, Emotion emotion) {
  if (emotion == Emotion::kNeutral) return;
  tags_[ascii_lower(word)] |= static_cast<std::uint8_t>(1u << static_cast<int>(emotion));
}

std::uint8_t EmotionLexicon::lookup(std::string_view word) const {
  auto it = tags_.find(ascii_lower(word));
  return it == tags_.end() ? 0 : it->second;
}

std::size_t EmotionLexicon::tag_count() const {
  std::size_t n = 0;
  for (const auto& [word, mask] : tags_) n += static_cast<std::size_t>(std::popcount(mask));
  return n;
}

EmotionLexicon parse_emotion_lexicon(std::istream& in, std::string_view source) {
  EmotionLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto t1 = row.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : row.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) +
                      ": expected word<TAB>category<TAB>flag");
    }
    const std::string_view word = row.substr(0, t1);
    const std::string category = ascii_lower(trim(row.substr(t1 + 1, t2 - t1 - 1)));
    const std::string_view flag = trim(row.substr(t2 + 1));
    if (flag != "0" && flag != "1") {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": flag must be 0 or 1");
    }
    if (category == "positive" || category == "negative") continue;
    const auto emotion = parse_emotion(category);
    if (!emotion) {
      warn(std::string(source) + ":" + std::to_string(line_no) + ": unknown category '" +
           category + "' skipped");
      continue;
    }
    if (flag == "1") lex.add(word, *emotion);
  }
  return lex;
}

EmotionLexicon load_emotion_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open emotion lexicon " + path.string());
  return parse_emotion_lexicon(in, path.string());
}

// ---------------------------------------------------------------------------
// Compound score: a port of the published VADER rule set (v3.3.2).

namespace {

constexpr double kBoosterIncrement = 0.293;
constexpr double kBoosterDecrement = -0.293;
constexpr double kCapsIncrement = 0.733;
constexpr double kNegationScalar = -0.74;
constexpr double kNormalizationAlpha = 15.0;

const std::unordered_set<std::string>& negation_words() {
  static const std::unordered_set<std::string> words = {
      "aint",     "arent",     "cannot",   "cant",     "couldnt",  "darent",    "didnt",
      "doesnt",   "ain't",     "aren't",   "can't",    "couldn't", "daren't",   "didn't",
      "doesn't",  "dont",      "hadnt",    "hasnt",    "havent",   "isnt",      "mightnt",
      "mustnt",   "neither",   "don't",    "hadn't",   "hasn't",   "haven't",   "isn't",
      "mightn't", "mustn't",   "neednt",   "needn't",  "never",    "none",      "nope",
      "nor",      "not",       "nothing",  "nowhere",  "oughtnt",  "shant",     "shouldnt",
      "uhuh",     "wasnt",     "werent",   "oughtn't", "shan't",   "shouldn't", "uh-uh",
      "wasn't",   "weren't",   "without",  "wont",     "wouldnt",  "won't",     "wouldn't",
      "rarely",   "seldom",    "despite"};
  return words;
}

const std::unordered_map<std::string, double>& booster_words() {
  static const std::unordered_map<std::string, double> words = [] {
    std::unordered_map<std::string, double> m;
    for (const char* w :
         {"absolutely", "amazingly", "awfully", "completely", "considerable", "considerably",
          "decidedly", "deeply", "effing", "enormous", "enormously", "entirely", "especially",
          "exceptional", "exceptionally", "extreme", "extremely", "fabulously", "flipping",
          "flippin", "frackin", "fracking", "fricking", "frickin", "frigging", "friggin", "fully",
          "fuckin", "fucking", "fuggin", "fugging", "greatly", "hella", "highly", "hugely",
          "incredible", "incredibly", "intensely", "major", "majorly", "more", "most",
          "particularly", "purely", "quite", "really", "remarkably", "so", "substantially",
          "thoroughly", "total", "totally", "tremendous", "tremendously", "uber", "unbelievably",
          "unusually", "utter", "utterly", "very"}) {
      m.emplace(w, kBoosterIncrement);
    }
    for (const char* w : {"almost", "barely", "hardly", "just enough", "kind of", "kinda",
                          "kindof", "kind-of", "less", "little", "marginal", "marginally",
                          "occasional", "occasionally", "partly", "scarce", "scarcely", "slight",
                          "slightly", "somewhat", "sort of", "sorta", "sortof", "sort-of"}) {
      m.emplace(w, kBoosterDecrement);
    }
    return m;
  }();
  return words;
}

const std::unordered_map<std::string, double>& special_cases() {
  static const std::unordered_map<std::string, double> m = {
      {"the shit", 3.0},       {"the bomb", 3.0},       {"bad ass", 1.5},
      {"badass", 1.5},         {"bus stop", 0.0},       {"yeah right", -2.0},
      {"kiss of death", -1.5}, {"to die for", 3.0},     {"beating heart", 3.5}};
  return m;
}

constexpr std::string_view kPunctuation = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

std::string strip_punctuation_if_word(const std::string& token) {
  const auto b = token.find_first_not_of(kPunctuation);
  if (b == std::string::npos) return token;
  const auto e = token.find_last_not_of(kPunctuation);
  std::string stripped = token.substr(b, e - b + 1);
  if (utf8_length(stripped) <= 2) return token;
  return stripped;
}

bool is_negation(const std::string& lower_word) {
  if (negation_words().contains(lower_word)) return true;
  return lower_word.find("n't") != std::string::npos;
}

double normalize(double score) {
  const double norm = score / std::sqrt(score * score + kNormalizationAlpha);
  return std::clamp(norm, -1.0, 1.0);
}

class SentenceScorer {
 public:
  SentenceScorer(std::string_view text, const SentimentLexicon& lex) : lex_(lex), text_(trim(text)) {
    words_ = split_whitespace(text_);
    for (auto& w : words_) w = strip_punctuation_if_word(w);
    lower_.reserve(words_.size());
    std::size_t caps = 0;
    for (const auto& w : words_) {
      lower_.push_back(ascii_lower(w));
      if (is_all_upper(w)) ++caps;
    }
    const std::size_t diff = words_.size() - caps;
    cap_differential_ = diff > 0 && diff < words_.size();
  }

  double compound() {
    if (words_.empty()) return 0.0;
    std::vector<double> sentiments;
    sentiments.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (booster_words().contains(lower_[i])) {
        sentiments.push_back(0.0);
        continue;
      }
      if (i + 1 < words_.size() && lower_[i] == "kind" && lower_[i + 1] == "of") {
        sentiments.push_back(0.0);
        continue;
      }
      sentiments.push_back(valence_at(i));
    }
    but_check(sentiments);
    double sum = 0.0;
    for (double s : sentiments) sum += s;
    const double amplifier = punctuation_emphasis();
    if (sum > 0) {
      sum += amplifier;
    } else if (sum < 0) {
      sum -= amplifier;
    }
    return normalize(sum);
  }

 private:
  bool in_lexicon(std::size_t i) const { return lex_.contains(lower_[i]); }

  double scalar_inc_dec(std::size_t j, double valence) const {
    double scalar = 0.0;
    auto it = booster_words().find(lower_[j]);
    if (it != booster_words().end()) {
      scalar = it->second;
      if (valence < 0) scalar *= -1;
      if (is_all_upper(words_[j]) && cap_differential_) {
        scalar += valence > 0 ? kCapsIncrement : -kCapsIncrement;
      }
    }
    return scalar;
  }

  double valence_at(std::size_t i) {
    const auto base = lex_.lookup(lower_[i]);
    if (!base) return 0.0;
    double valence = *base;
    const std::size_t n = words_.size();
    if (lower_[i] == "no" && i != n - 1 && in_lexicon(i + 1)) valence = 0.0;
    if ((i > 0 && lower_[i - 1] == "no") || (i > 1 && lower_[i - 2] == "no") ||
        (i > 2 && lower_[i - 3] == "no" && (lower_[i - 1] == "or" || lower_[i - 1] == "nor"))) {
      valence = *base * kNegationScalar;
    }
    if (is_all_upper(words_[i]) && cap_differential_) {
      valence += valence > 0 ? kCapsIncrement : -kCapsIncrement;
    }
    for (std::size_t start = 0; start < 3; ++start) {
      if (i > start && !in_lexicon(i - (start + 1))) {
        double s = scalar_inc_dec(i - (start + 1), valence);
        if (start == 1 && s != 0) s *= 0.95;
        if (start == 2 && s != 0) s *= 0.9;
        valence += s;
        valence = negation_check(valence, start, i);
        if (start == 2) valence = special_idioms_check(valence, i);
      }
    }
    return least_check(valence, i);
  }

  double negation_check(double valence, std::size_t start, std::size_t i) const {
    const auto& w = lower_;
    if (start == 0) {
      if (is_negation(w[i - 1])) valence *= kNegationScalar;
    } else if (start == 1) {
      if (w[i - 2] == "never" && (w[i - 1] == "so" || w[i - 1] == "this")) {
        valence *= 1.25;
      } else if (w[i - 2] == "without" && w[i - 1] == "doubt") {
      } else if (is_negation(w[i - 2])) {
        valence *= kNegationScalar;
      }
    } else {
      // Operator precedence of the reference: (never && (so||this)) || (so||this).
      if ((w[i - 3] == "never" && (w[i - 2] == "so" || w[i - 2] == "this")) ||
          (w[i - 1] == "so" || w[i - 1] == "this")) {
        valence *= 1.25;
      } else if (w[i - 3] == "without" && (w[i - 2] == "doubt" || w[i - 1] == "doubt")) {
      } else if (is_negation(w[i - 3])) {
        valence *= kNegationScalar;
      }
    }
    return valence;
  }

  double special_idioms_check(double valence, std::size_t i) const {
    const auto& w = lower_;
    const std::string onezero = w[i - 1] + " " + w[i];
    const std::string twoonezero = w[i - 2] + " " + w[i - 1] + " " + w[i];
    const std::string twoone = w[i - 2] + " " + w[i - 1];
    const std::string threetwoone = w[i - 3] + " " + w[i - 2] + " " + w[i - 1];
    const std::string threetwo = w[i - 3] + " " + w[i - 2];
    const auto& special = special_cases();
    for (const std::string* seq : {&onezero, &twoonezero, &twoone, &threetwoone, &threetwo}) {
      auto it = special.find(*seq);
      if (it != special.end()) {
        valence = it->second;
        break;
      }
    }
    if (w.size() - 1 > i) {
      auto it = special.find(w[i] + " " + w[i + 1]);
      if (it != special.end()) valence = it->second;
    }
    if (w.size() - 1 > i + 1) {
      auto it = special.find(w[i] + " " + w[i + 1] + " " + w[i + 2]);
      if (it != special.end()) valence = it->second;
    }
    for (const std::string* gram : {&threetwoone, &threetwo, &twoone}) {
      auto it = booster_words().find(*gram);
      if (it != booster_words().end()) valence += it->second;
    }
    return valence;
  }

  double least_check(double valence, std::size_t i) const {
    const auto& w = lower_;
    if (i > 1 && !in_lexicon(i - 1) && w[i - 1] == "least") {
      if (w[i - 2] != "at" && w[i - 2] != "very") valence *= kNegationScalar;
    } else if (i > 0 && !in_lexicon(i - 1) && w[i - 1] == "least") {
      valence *= kNegationScalar;
    }
    return valence;
  }

  // The reference rescales by value lookup (list.index), so repeated values
  // always hit their first occurrence; reproduced as-is.
  void but_check(std::vector<double>& sentiments) const {
    const auto but = std::find(lower_.begin(), lower_.end(), "but");
    if (but == lower_.end()) return;
    const auto bi = static_cast<std::size_t>(but - lower_.begin());
    for (std::size_t pos = 0; pos < sentiments.size(); ++pos) {
      const double value = sentiments[pos];
      const auto si = static_cast<std::size_t>(
          std::find(sentiments.begin(), sentiments.end(), value) - sentiments.begin());
      if (si < bi) {
        sentiments[si] = value * 0.5;
      } else if (si > bi) {
        sentiments[si] = value * 1.5;
      }
    }
  }

  double punctuation_emphasis() const {
    const auto ep = std::min<std::ptrdiff_t>(std::count(text_.begin(), text_.end(), '!'), 4);
    const auto qm = std::count(text_.begin(), text_.end(), '?');
    double qm_amp = 0.0;
    if (qm > 1) qm_amp = qm <= 3 ? static_cast<double>(qm) * 0.18 : 0.96;
    return static_cast<double>(ep) * 0.292 + qm_amp;
  }

  const SentimentLexicon& lex_;
  std::string_view text_;
  std::vector<std::string> words_;
  std::vector<std::string> lower_;
  bool cap_differential_ = false;
};

}  // namespace

double compound_score(std::string_view sentence, const SentimentLexicon& lexicon) {
  return SentenceScorer(sentence, lexicon).compound();
}

double compound_score(std::span<const std::string> sentence_tokens,
                      const SentimentLexicon& lexicon) {
  std::string joined;
  for (const auto& t : sentence_tokens) {
    if (!joined.empty()) joined.push_back(' ');
    joined += t;
  }
  return compound_score(std::string_view(joined), lexicon);
}

SentimentLabel label_from_score(double score) {
  if (score <= -0.05) return SentimentLabel::kNegative;
  if (score >= 0.05) return SentimentLabel::kPositive;
  return SentimentLabel::kNeutral;
}

SentimentAnnotation annotate_sentiment(const TokenizedInstance& instance,
                                       const SentimentLexicon& lexicon) {
  SentimentAnnotation out;
  out.labels.assign(instance.word_count(), SentimentLabel::kNeutral);
  out.sentence_scores.reserve(instance.sentences.size());
  for (const auto& sentence : instance.sentences) {
    const double score = compound_score(std::string_view(sentence.text), lexicon);
    out.sentence_scores.push_back(score);
    const SentimentLabel label = label_from_score(score);
    std::fill(out.labels.begin() + static_cast<std::ptrdiff_t>(sentence.tokens.begin),
              out.labels.begin() + static_cast<std::ptrdiff_t>(sentence.tokens.end), label);
  }
  return out;
}

Emotion emotion_for(std::string_view word, const EmotionLexicon& lexicon) {
  const std::uint8_t mask = lexicon.lookup(word);
  if (mask == 0) return Emotion::kNeutral;
  return static_cast<Emotion>(std::countr_zero(mask));
}

std::vector<Emotion> annotate_emotion(std::span<const std::string> tokens,
                                      const EmotionLexicon& lexicon) {
  std::vector<Emotion> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(emotion_for(t, lexicon));
  return out;
}

AffectAnnotation annotate(const TokenizedInstance& instance, const SentimentLexicon* sentiment,
                          const EmotionLexicon* emotion) {
  AffectAnnotation out;
  const std::size_t n = instance.word_count();
  if (sentiment != nullptr) {
    auto s = annotate_sentiment(instance, *sentiment);
    out.sentiment_labels = std::move(s.labels);
    out.sentence_scores = std::move(s.sentence_scores);
  } else {
    out.sentiment_labels.assign(n, SentimentLabel::kNeutral);
  }
  if (emotion != nullptr) {
    const auto words = instance.words();
    out.emotion_labels = annotate_emotion(words, *emotion);
  } else {
    out.emotion_labels.assign(n, Emotion::kNeutral);
  }
  return out;
}

}  // namespace stancelab
