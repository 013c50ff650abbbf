// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#include "stancelab/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "stancelab/error.hpp"
#include "stancelab/text.hpp"

namespace stancelab {

using nlohmann::json;

std::string_view to_string(Stance stance) { return stance == Stance::kPro ? "pro" : "con"; }

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

std::optional<Stance> parse_stance(std::string_view text) {
  const std::string s = ascii_lower(trim(text));
  if (s == "pro") return Stance::kPro;
  if (s == "con") return Stance::kCon;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view text) {
  const std::string s = ascii_lower(trim(text));
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

std::vector<std::string> TokenizedInstance::words() const {
  std::vector<std::string> out;
  out.reserve(word_count());
  out.insert(out.end(), question_tokens.begin(), question_tokens.end());
  out.insert(out.end(), perspective_tokens.begin(), perspective_tokens.end());
  return out;
}

namespace {

Instance make_instance(std::string id, std::string topic, std::string question,
                       std::string perspective, std::string_view stance, std::string_view split,
                       const std::string& where) {
  Instance inst;
  inst.id = std::move(id);
  inst.topic = std::move(topic);
  inst.question = std::move(question);
  inst.perspective = std::move(perspective);
  if (inst.id.empty()) throw DataError(where + ": empty id");
  const auto st = parse_stance(stance);
  if (!st) {
    throw DataError(where + ": record '" + inst.id + "' has unknown stance '" + std::string(stance) +
                    "'");
  }
  inst.stance = *st;
  const auto sp = parse_split(split);
  if (!sp) {
    throw DataError(where + ": record '" + inst.id + "' has unknown split '" + std::string(split) +
                    "'");
  }
  inst.split = *sp;
  if (trim(inst.question).empty() || trim(inst.perspective).empty()) {
    throw DataError(where + ": record '" + inst.id + "' has an empty question or perspective");
  }
  return inst;
}

void check_unique(const Corpus& corpus, std::string_view source) {
  std::unordered_set<std::string> seen;
  for (const auto& inst : corpus) {
    if (!seen.insert(inst.id).second) {
      throw DataError(std::string(source) + ": duplicate id '" + inst.id + "'");
    }
  }
}

std::string required_string(const json& rec, const char* key, const std::string& where) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    throw DataError(where + ": missing or non-string field '" + key + "'");
  }
  return it->get<std::string>();
}

// RFC 4180 style: quoted fields may contain delimiters, doubled quotes and newlines.
bool read_delimited_record(std::istream& in, char delim, std::vector<std::string>& fields,
                           std::size_t& line_no) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line_no;
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      in_quotes = true;
    } else if (c == delim) {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      ++line_no;
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field near line " + std::to_string(line_no));
  if (!any) return false;
  if (!field.empty() && field.back() == '\r') field.pop_back();
  fields.push_back(std::move(field));
  return true;
}

}  // namespace

Corpus parse_jsonl_corpus(std::istream& in, std::string_view source_name) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = std::string(source_name) + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON record (" + e.what() + ")");
    }
    if (!rec.is_object()) throw DataError(where + ": record is not a JSON object");
    corpus.push_back(make_instance(
        required_string(rec, "id", where), required_string(rec, "topic", where),
        required_string(rec, "question", where), required_string(rec, "perspective", where),
        required_string(rec, "stance", where), required_string(rec, "split", where), where));
  }
  check_unique(corpus, source_name);
  return corpus;
}

Corpus parse_delimited_corpus(std::istream& in, char delimiter, const ColumnMap& columns,
                              std::string_view source_name) {
  Corpus corpus;
  std::vector<std::string> fields;
  std::size_t line_no = 1;
  if (!read_delimited_record(in, delimiter, fields, line_no)) return corpus;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < fields.size(); ++i) index[std::string(trim(fields[i]))] = i;
  auto col = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) {
      throw DataError(std::string(source_name) + ": header lacks column '" + name + "'");
    }
    return it->second;
  };
  const std::size_t c_id = col(columns.id), c_topic = col(columns.topic),
                    c_q = col(columns.question), c_p = col(columns.perspective),
                    c_st = col(columns.stance), c_sp = col(columns.split);
  const std::size_t needed = std::max({c_id, c_topic, c_q, c_p, c_st, c_sp}) + 1;
  std::size_t record_line = line_no;
  while (read_delimited_record(in, delimiter, fields, line_no)) {
    const std::string where = std::string(source_name) + ":" + std::to_string(record_line);
    record_line = line_no;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    if (fields.size() < needed) {
      throw DataError(where + ": expected at least " + std::to_string(needed) + " fields, got " +
                      std::to_string(fields.size()));
    }
    corpus.push_back(make_instance(fields[c_id], fields[c_topic], fields[c_q], fields[c_p],
                                   fields[c_st], fields[c_sp], where));
  }
  check_unique(corpus, source_name);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const ColumnMap& columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  switch (format) {
    case CorpusFormat::kJsonl: return parse_jsonl_corpus(in, path.string());
    case CorpusFormat::kCsv: return parse_delimited_corpus(in, ',', columns, path.string());
    case CorpusFormat::kTsv: return parse_delimited_corpus(in, '\t', columns, path.string());
  }
  return {};
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& inst : corpus) {
    json rec = {{"id", inst.id},
                {"topic", inst.topic},
                {"question", inst.question},
                {"perspective", inst.perspective},
                {"stance", to_string(inst.stance)},
                {"split", to_string(inst.split)}};
    out << rec.dump() << '\n';
  }
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  write_corpus(out, corpus);
  if (!out) throw DataError("failed writing corpus file " + path.string());
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush();
      ++i;
    } else if (c >= 0x80) {
      // Non-ASCII code points are word characters; copy the full UTF-8 sequence.
      const std::size_t len = utf8_sequence_length(c);
      current.append(text.substr(i, len));
      i += len;
    } else if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
      ++i;
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
      ++i;
    }
  }
  flush();
  return tokens;
}

const std::vector<std::string_view>& abbreviations() {
  static const std::vector<std::string_view> list = {
      "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "inc", "ltd", "co", "corp",
      "gov", "sen", "rep", "gen", "col", "lt", "sgt", "capt", "rev", "hon", "no", "vol", "fig",
      "approx", "dept", "est", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept",
      "oct", "nov", "dec", "e.g", "i.e", "u.s", "u.k", "a.m", "p.m", "ph.d", "u.s.a", "al"};
  return list;
}

namespace {

bool is_abbreviation(std::string_view text, std::size_t dot) {
  // Word immediately preceding the '.' at `dot`, including internal dots (e.g. "u.s").
  std::size_t start = dot;
  while (start > 0) {
    const auto c = static_cast<unsigned char>(text[start - 1]);
    if (std::isalpha(c) || c == '.') {
      --start;
    } else {
      break;
    }
  }
  if (start == dot) return false;
  const std::string word = ascii_lower(text.substr(start, dot - start));
  const auto& list = abbreviations();
  return std::find(list.begin(), list.end(), word) != list.end();
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

}  // namespace

std::vector<Span> split_sentences(std::string_view text) {
  std::vector<Span> spans;
  if (trim(text).empty()) return spans;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    const std::size_t run_begin = i;
    while (i < text.size() && is_terminator(text[i])) ++i;
    const std::size_t run_end = i;
    while (i < text.size() && is_closer(text[i])) ++i;
    const bool at_boundary =
        i == text.size() || std::isspace(static_cast<unsigned char>(text[i]));
    if (!at_boundary) continue;
    const bool single_dot = run_end - run_begin == 1 && text[run_begin] == '.';
    if (single_dot && is_abbreviation(text, run_begin)) continue;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    spans.push_back({start, i});
    start = i;
  }
  if (start < text.size()) {
    if (trim(text.substr(start)).empty() && !spans.empty()) {
      spans.back().end = text.size();
    } else {
      spans.push_back({start, text.size()});
    }
  }
  // Leading whitespace before the first sentence belongs to it.
  spans.front().begin = 0;
  return spans;
}

namespace {

void append_sentences(std::string_view text, std::vector<std::string>& tokens,
                      std::vector<Sentence>& sentences, std::size_t offset) {
  for (const Span& span : split_sentences(text)) {
    const std::string_view piece = text.substr(span.begin, span.size());
    auto piece_tokens = tokenize(piece);
    if (piece_tokens.empty()) continue;
    Sentence s;
    s.tokens.begin = offset + tokens.size();
    tokens.insert(tokens.end(), std::make_move_iterator(piece_tokens.begin()),
                  std::make_move_iterator(piece_tokens.end()));
    s.tokens.end = offset + tokens.size();
    s.text = std::string(trim(piece));
    sentences.push_back(std::move(s));
  }
}

}  // namespace

TokenizedInstance tokenize_instance(const Instance& instance) {
  TokenizedInstance out;
  out.instance = instance;
  append_sentences(instance.question, out.question_tokens, out.sentences, 0);
  append_sentences(instance.perspective, out.perspective_tokens, out.sentences,
                   out.question_tokens.size());
  return out;
}

std::vector<SplitStats> corpus_stats(const Corpus& corpus) {
  struct Acc {
    std::set<std::string> topics;
    std::size_t words = 0;
    SplitStats stats;
  };
  std::map<int, Acc> acc;
  for (const auto& inst : corpus) {
    auto& a = acc[static_cast<int>(inst.split)];
    a.stats.split = inst.split;
    a.topics.insert(inst.topic);
    a.words += whitespace_word_count(inst.perspective);
    (inst.stance == Stance::kPro ? a.stats.n_pro : a.stats.n_con) += 1;
    a.stats.total += 1;
  }
  std::vector<SplitStats> out;
  for (auto& [key, a] : acc) {
    a.stats.n_topics = a.topics.size();
    a.stats.avg_words = static_cast<std::size_t>(
        std::llround(static_cast<double>(a.words) / static_cast<double>(a.stats.total)));
    out.push_back(a.stats);
  }
  return out;
}

const std::vector<std::string>& fixture_positive_words() {
  static const std::vector<std::string> words = {"good",    "great",    "excellent", "beneficial",
                                                 "healthy", "helpful",  "wonderful", "effective",
                                                 "valuable", "success"};
  return words;
}

const std::vector<std::string>& fixture_negative_words() {
  static const std::vector<std::string> words = {"bad",     "dangerous", "terrible", "unfair",
                                                 "awful",   "poor",      "failure",  "threat",
                                                 "wrong",   "damage"};
  return words;
}

const std::vector<std::string>& fixture_filler_words() {
  static const std::vector<std::string> words = {
      "policy",   "people",   "state",    "law",      "tax",     "school",  "students",
      "citizens", "program",  "city",     "data",     "report",  "system",  "children",
      "families", "research", "market",   "cost",     "community", "plan",  "rules",
      "evidence", "experts",  "water",    "industry", "workers", "proposal", "measure"};
  return words;
}

namespace {

const std::vector<std::string>& fixture_verbs() {
  static const std::vector<std::string> verbs = {"affects", "changes", "shapes",  "covers",
                                                 "involves", "includes", "requires", "uses"};
  return verbs;
}

struct FixtureTopic {
  const char* topic;
  const char* question;
};

constexpr FixtureTopic kFixtureTopics[] = {
    {"school-uniforms", "Should students have to wear school uniforms?"},
    {"vaping", "Is vaping with e-cigarettes safe?"},
    {"net-neutrality", "Should net neutrality be restored?"},
    {"tuition", "Should public college be tuition-free?"},
    {"milk", "Is drinking milk healthy for humans?"},
};

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, v.size() - 1);
  return v[dist(rng)];
}

}  // namespace

Corpus make_fixture(const FixtureOptions& options) {
  if (options.n_instances < 2) throw ConfigError("make_fixture requires n_instances >= 2");
  if (!(options.affect_signal_strength >= 0.0 && options.affect_signal_strength <= 1.0)) {
    throw ConfigError("affect_signal_strength must lie in [0, 1]");
  }
  const auto& pos = options.positive_words.empty() ? fixture_positive_words() : options.positive_words;
  const auto& neg = options.negative_words.empty() ? fixture_negative_words() : options.negative_words;
  const auto& filler = fixture_filler_words();
  const auto& verbs = fixture_verbs();

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t n = options.n_instances;
  std::vector<Stance> stances(n);
  for (std::size_t i = 0; i < n; ++i) stances[i] = i % 2 == 0 ? Stance::kPro : Stance::kCon;
  std::shuffle(stances.begin(), stances.end(), rng);

  const auto n_dev = static_cast<std::size_t>(std::llround(options.dev_fraction * n));
  const auto n_test = static_cast<std::size_t>(std::llround(options.test_fraction * n));
  const std::size_t n_train = n - std::min(n, n_dev + n_test);

  auto filler_sentence = [&] {
    return "The " + pick(filler, rng) + " " + pick(verbs, rng) + " the " + pick(filler, rng) + ".";
  };

  Corpus corpus;
  corpus.reserve(n);
  constexpr std::size_t n_topics = std::size(kFixtureTopics);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& topic = kFixtureTopics[i % n_topics];
    const Stance stance = stances[i];
    // With probability `strength` the planted polarity follows the stance; otherwise it is random.
    bool positive = stance == Stance::kPro;
    if (unit(rng) >= options.affect_signal_strength) positive = unit(rng) < 0.5;

    std::vector<std::string> sentences;
    for (std::size_t k = 0; k < options.filler_sentences; ++k) sentences.push_back(filler_sentence());
    for (std::size_t k = 0; k < options.planted_per_instance; ++k) {
      const std::string& word = positive ? pick(pos, rng) : pick(neg, rng);
      std::string s = "The " + pick(filler, rng) + " is " + word + " for " + pick(filler, rng) + ".";
      std::uniform_int_distribution<std::size_t> at(0, sentences.size());
      sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(at(rng)), std::move(s));
    }
    std::string perspective;
    for (const auto& s : sentences) {
      if (!perspective.empty()) perspective.push_back(' ');
      perspective += s;
    }

    Instance inst;
    std::ostringstream id;
    id << "fx-" << options.seed << "-" << i;
    inst.id = id.str();
    inst.topic = topic.topic;
    inst.question = topic.question;
    inst.perspective = std::move(perspective);
    inst.stance = stance;
    inst.split = i < n_train ? Split::kTrain : (i < n_train + n_dev ? Split::kDev : Split::kTest);
    corpus.push_back(std::move(inst));
  }
  return corpus;
}

Corpus make_fixture(std::uint64_t seed, std::size_t n_instances, double affect_signal_strength) {
  FixtureOptions options;
  options.seed = seed;
  options.n_instances = n_instances;
  options.affect_signal_strength = affect_signal_strength;
  return make_fixture(options);
}

}  // namespace stancelab
