// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "stancelab/corpus.hpp"
#include "stancelab/error.hpp"
#include "stancelab/text.hpp"
#include "support.hpp"

using namespace stancelab;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& t : v) s += (s.empty() ? "" : " ") + t;
  return s;
}

Instance make(std::string id, Stance st, Split sp, std::string perspective = "It is fine.") {
  return {std::move(id), "topic", "Is it ok?", std::move(perspective), st, sp};
}

}  // namespace

TEST_CASE("text helpers") {
  CHECK(trim("  a b \t\n") == "a b");
  CHECK(ascii_lower("AbC-\xc3\x89") == "abc-\xc3\x89");
  CHECK(utf8_length("caf\xc3\xa9") == 4);
  CHECK(whitespace_word_count("  one two\tthree\n") == 3);
  CHECK(split_whitespace(" a  b ") == std::vector<std::string>{"a", "b"});
  CHECK(is_all_upper("GOOD!"));
  CHECK_FALSE(is_all_upper("Good"));
  CHECK_FALSE(is_all_upper("123"));
  CHECK(html_escape("<a href=\"x\">&'") == "&lt;a href=&quot;x&quot;&gt;&amp;&#39;");
}

TEST_CASE("tokenize splits punctuation and lowercases") {
  CHECK(tokenize("Is vaping safe?") == std::vector<std::string>{"is", "vaping", "safe", "?"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("   ").empty());
  CHECK(tokenize("Hello,WORLD!!") == std::vector<std::string>{"hello", ",", "world", "!", "!"});
}

TEST_CASE("tokenize golden file") {
  const auto golden = split_whitespace(testing::read_file(testing::test_dir() / "golden/tokenize_e_cigarettes.txt"));
  CHECK(tokenize("e-cigarettes aren't") == golden);
}

TEST_CASE("tokenize is idempotent on its joined output") {
  std::mt19937_64 rng(11);
  const std::string alphabet = "abcXYZ019 .,!?'-\"()";
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const std::size_t n = rng() % 40;
    for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    const auto once = tokenize(s);
    CHECK(tokenize(join(once)) == once);
  }
}

TEST_CASE("split_sentences examples") {
  const std::string abc = "A. B? C!";
  CHECK(split_sentences(abc).size() == 3);
  CHECK(split_sentences("no terminator here").size() == 1);
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("   ").empty());

  const std::string dr = "Dr. Smith agrees. So do we.";
  const auto spans = split_sentences(dr);
  std::istringstream golden(testing::read_file(testing::test_dir() / "golden/sentences_dr_smith.tsv"));
  std::string line;
  std::size_t i = 0;
  while (std::getline(golden, line)) {
    REQUIRE(i < spans.size());
    std::istringstream row(line);
    std::size_t b = 0, e = 0;
    char tab = 0;
    row >> b >> e;
    row.get(tab);
    std::string text;
    std::getline(row, text);
    CHECK(spans[i].begin == b);
    CHECK(spans[i].end == e);
    CHECK(dr.substr(b, e - b) == text);
    ++i;
  }
  CHECK(i == spans.size());
}

TEST_CASE("split_sentences spans cover the text") {
  std::mt19937_64 rng(5);
  const std::string alphabet = "ab .!?\"') Mr";
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const std::size_t n = 1 + rng() % 60;
    for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    const auto spans = split_sentences(s);
    if (trim(s).empty()) {
      CHECK(spans.empty());
      continue;
    }
    REQUIRE_FALSE(spans.empty());
    CHECK(spans.front().begin == 0);
    CHECK(spans.back().end == s.size());
    for (std::size_t k = 1; k < spans.size(); ++k) CHECK(spans[k].begin == spans[k - 1].end);
    for (const auto& sp : spans) CHECK(sp.end > sp.begin);
  }
}

TEST_CASE("tokenized sentences partition the word sequence") {
  const Corpus fx = make_fixture(3, 40, 0.5);
  for (const auto& inst : fx) {
    const TokenizedInstance t = tokenize_instance(inst);
    REQUIRE_FALSE(t.sentences.empty());
    CHECK(t.sentences.front().tokens.begin == 0);
    CHECK(t.sentences.back().tokens.end == t.word_count());
    for (std::size_t k = 1; k < t.sentences.size(); ++k) {
      CHECK(t.sentences[k].tokens.begin == t.sentences[k - 1].tokens.end);
    }
    CHECK(t.words().size() == t.word_count());
  }
}

TEST_CASE("jsonl parsing and validation") {
  SUBCASE("empty input gives an empty corpus") {
    std::istringstream in("");
    CHECK(parse_jsonl_corpus(in).empty());
  }
  SUBCASE("stance normalized case-insensitively") {
    std::istringstream in(
        R"({"id":"a","topic":"t","question":"q?","perspective":"p.","stance":"PRO","split":"Train"})"
        "\n");
    const Corpus c = parse_jsonl_corpus(in);
    REQUIRE(c.size() == 1);
    CHECK(c[0].stance == Stance::kPro);
    CHECK(c[0].split == Split::kTrain);
  }
  SUBCASE("unknown stance names the record") {
    std::istringstream in(
        R"({"id":"rec-9","topic":"t","question":"q?","perspective":"p.","stance":"maybe","split":"train"})"
        "\n");
    try {
      parse_jsonl_corpus(in);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("rec-9") != std::string::npos);
    }
  }
  SUBCASE("malformed line names the line") {
    std::istringstream in("{\"id\": \n");
    try {
      parse_jsonl_corpus(in, "c.jsonl");
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("c.jsonl:1") != std::string::npos);
    }
  }
  SUBCASE("duplicate ids rejected") {
    std::istringstream in(
        R"({"id":"a","topic":"t","question":"q?","perspective":"p.","stance":"pro","split":"train"})"
        "\n"
        R"({"id":"a","topic":"t","question":"q?","perspective":"p.","stance":"con","split":"train"})"
        "\n");
    CHECK_THROWS_AS(parse_jsonl_corpus(in), DataError);
  }
  SUBCASE("empty perspective rejected") {
    std::istringstream in(
        R"({"id":"a","topic":"t","question":"q?","perspective":"  ","stance":"pro","split":"train"})"
        "\n");
    CHECK_THROWS_AS(parse_jsonl_corpus(in), DataError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.jsonl"), DataError);
  }
}

TEST_CASE("delimited parsing with quoting") {
  std::istringstream in(
      "id,topic,question,perspective,stance,split\n"
      "x1,milk,\"Is milk, in fact, healthy?\",\"It has \"\"calcium\"\".\",con,dev\n");
  const Corpus c = parse_delimited_corpus(in, ',');
  REQUIRE(c.size() == 1);
  CHECK(c[0].question == "Is milk, in fact, healthy?");
  CHECK(c[0].perspective == "It has \"calcium\".");
  CHECK(c[0].stance == Stance::kCon);
  CHECK(c[0].split == Split::kDev);
}

TEST_CASE("round trip through the jsonl writer") {
  const Corpus fx = make_fixture(9, 30, 0.7);
  testing::TempDir dir;
  write_corpus(dir / "c.jsonl", fx);
  CHECK(load_corpus(dir / "c.jsonl") == fx);
}

TEST_CASE("corpus_stats") {
  SUBCASE("single instance") {
    const Corpus c = {make(std::string("one"), Stance::kCon, Split::kDev, "five words are right here")};
    const auto s = corpus_stats(c);
    const auto it = std::find_if(s.begin(), s.end(), [](const SplitStats& x) { return x.split == Split::kDev; });
    REQUIRE(it != s.end());
    CHECK(it->total == 1);
    CHECK(it->n_con == 1);
    CHECK(it->avg_words == 5);
    CHECK(it->n_topics == 1);
  }
  SUBCASE("totals match split counts") {
    const Corpus fx = make_fixture(1, 97, 1.0);
    std::map<Split, std::size_t> count;
    for (const auto& i : fx) ++count[i.split];
    for (const auto& s : corpus_stats(fx)) {
      CHECK(s.total == s.n_pro + s.n_con);
      CHECK(s.total == count[s.split]);
    }
  }
  SUBCASE("average rounds to nearest") {
    const Corpus c = {make("a", Stance::kPro, Split::kTrain, "one two"),
                      make("b", Stance::kPro, Split::kTrain, "one two three")};
    for (const auto& s : corpus_stats(c)) {
      if (s.split == Split::kTrain) CHECK(s.avg_words == 3);  // 2.5 rounds up
    }
  }
}

namespace {

// Counts planted positive and negative words; predicts pro when positives win.
double oracle_accuracy(const Corpus& c) {
  const std::set<std::string> pos(fixture_positive_words().begin(), fixture_positive_words().end());
  const std::set<std::string> neg(fixture_negative_words().begin(), fixture_negative_words().end());
  std::size_t right = 0;
  for (const auto& inst : c) {
    int score = 0;
    for (const auto& w : tokenize(inst.perspective)) score += pos.contains(w) - neg.contains(w);
    const Stance guess = score > 0 ? Stance::kPro : Stance::kCon;
    right += guess == inst.stance;
  }
  return static_cast<double>(right) / static_cast<double>(c.size());
}

}  // namespace

TEST_CASE("make_fixture") {
  SUBCASE("deterministic") {
    testing::TempDir dir;
    write_corpus(dir / "a.jsonl", make_fixture(7, 100, 1.0));
    write_corpus(dir / "b.jsonl", make_fixture(7, 100, 1.0));
    CHECK(testing::read_file(dir / "a.jsonl") == testing::read_file(dir / "b.jsonl"));
  }
  SUBCASE("balanced classes and unique ids") {
    for (std::size_t n : {2u, 3u, 50u, 101u}) {
      const Corpus c = make_fixture(4, n, 0.3);
      CHECK(c.size() == n);
      std::size_t pro = 0;
      std::set<std::string> ids;
      for (const auto& i : c) {
        pro += i.stance == Stance::kPro;
        ids.insert(i.id);
      }
      CHECK(ids.size() == n);
      const auto diff = static_cast<long>(2 * pro) - static_cast<long>(n);
      CHECK(std::abs(diff) <= 1);
    }
  }
  SUBCASE("strength 1 is perfectly separable by the word-count oracle") {
    CHECK(oracle_accuracy(make_fixture(7, 200, 1.0)) == doctest::Approx(1.0));
  }
  SUBCASE("strength 0 leaves the oracle near chance") {
    CHECK(std::abs(oracle_accuracy(make_fixture(7, 400, 0.0)) - 0.5) <= 0.1);
  }
  SUBCASE("every split is populated") {
    std::set<Split> seen;
    for (const auto& i : make_fixture(2, 60, 1.0)) seen.insert(i.split);
    CHECK(seen.size() == 3);
  }
}
