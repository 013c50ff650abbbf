// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#include "stancelab/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "stancelab/affect.hpp"
#include "stancelab/corpus.hpp"
#include "stancelab/embeddings.hpp"
#include "stancelab/error.hpp"
#include "stancelab/evaluation.hpp"
#include "stancelab/explain.hpp"
#include "stancelab/log.hpp"
#include "stancelab/text.hpp"

#ifndef STANCELAB_DATA_DIR
#define STANCELAB_DATA_DIR "data"
#endif

namespace stancelab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig default_run_config() {
  RunConfig c;
  c.sentiment_lexicon = std::string(STANCELAB_DATA_DIR) + "/vader_lexicon.txt";
  c.emotion_lexicon = std::string(STANCELAB_DATA_DIR) + "/emotion_lexicon_sample.tsv";
  c.fallback_dim = 64;
  return c;
}

json to_json(const RunConfig& c) {
  return {{"corpus", c.corpus},
          {"corpus_format", c.corpus_format},
          {"sentiment_lexicon", c.sentiment_lexicon},
          {"emotion_lexicon", c.emotion_lexicon},
          {"embeddings", c.embeddings},
          {"fallback_dim", c.fallback_dim},
          {"out", c.out},
          {"split", c.split},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"input", {{"pair_mode", c.input.pair_mode}, {"max_tokens", c.input.max_tokens}}}};
}

void merge_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {"corpus", "corpus_format", "sentiment_lexicon",
                                              "emotion_lexicon", "embeddings", "fallback_dim",
                                              "out", "split", "model", "train", "input"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  auto check_nested = [&j](const char* section, const json& allowed) {
    if (!j.contains(section)) return;
    if (!j.at(section).is_object()) throw ConfigError(std::string("config '") + section + "' must be an object");
    for (const auto& [key, _] : j.at(section).items()) {
      if (!allowed.contains(key)) throw ConfigError("unknown config key '" + std::string(section) + "." + key + "'");
    }
  };
  check_nested("model", to_json(c.model));
  check_nested("train", to_json(c.train));
  check_nested("input", json{{"pair_mode", true}, {"max_tokens", 0}});
  try {
    c.corpus = j.value("corpus", c.corpus);
    c.corpus_format = j.value("corpus_format", c.corpus_format);
    c.sentiment_lexicon = j.value("sentiment_lexicon", c.sentiment_lexicon);
    c.emotion_lexicon = j.value("emotion_lexicon", c.emotion_lexicon);
    c.embeddings = j.value("embeddings", c.embeddings);
    c.fallback_dim = j.value("fallback_dim", c.fallback_dim);
    c.out = j.value("out", c.out);
    c.split = j.value("split", c.split);
    if (j.contains("model")) {
      json merged = to_json(c.model);
      merged.update(j.at("model"));
      c.model = model_config_from_json(merged);
    }
    if (j.contains("train")) {
      json merged = to_json(c.train);
      merged.update(j.at("train"));
      const std::size_t threads = c.train.threads;
      c.train = train_config_from_json(merged);
      c.train.threads = threads;
    }
    if (j.contains("input")) {
      c.input.pair_mode = j.at("input").value("pair_mode", c.input.pair_mode);
      c.input.max_tokens = j.at("input").value("max_tokens", c.input.max_tokens);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

std::size_t thread_budget() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("STANCELAB_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != nullptr && *end == '\0' && cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
    else warn("ignoring invalid STANCELAB_THREADS='" + std::string(env) + "'");
  }
  return n;
}

namespace {

// Flags that, when given, override the config file.
struct Flags {
  std::string config_file;
  std::optional<std::string> corpus, corpus_format, sentiment_lexicon, emotion_lexicon, embeddings, out,
      split, affect;
  std::optional<std::size_t> fallback_dim, hidden, affect_dim, epochs, batch_size, patience, max_tokens;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, consistency_weight, dropout;
  bool unidirectional = false;
  bool unary = false;
  bool consistency = false;
  CLI::Option* consistency_opt = nullptr;
  CLI::Option* unidirectional_opt = nullptr;
  CLI::Option* unary_opt = nullptr;
};

void add_data_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_file, "JSON config file (flags take precedence)");
  app->add_option("--corpus", f.corpus, "Corpus file");
  app->add_option("--corpus-format", f.corpus_format, "Corpus format: jsonl, csv or tsv");
  app->add_option("--sentiment-lexicon", f.sentiment_lexicon, "Sentiment lexicon (VADER format)");
  app->add_option("--emotion-lexicon", f.emotion_lexicon, "Emotion lexicon (word, emotion, flag)");
}

void add_model_flags(CLI::App* app, Flags& f) {
  app->add_option("--embeddings", f.embeddings, "Contextual embedding file");
  app->add_option("--fallback-dim", f.fallback_dim, "Width of the trainable token table when no embeddings are given");
  app->add_option("--affect", f.affect, "Affect signal: sentiment, emotion or none");
  app->add_option("--hidden", f.hidden, "Hidden units per direction");
  app->add_option("--affect-dim", f.affect_dim, "Affect embedding width");
  app->add_option("--dropout", f.dropout, "Dropout on the pooled vector during training");
  f.unidirectional_opt = app->add_flag("--unidirectional", f.unidirectional, "Forward GRU only");
  f.unary_opt = app->add_flag("--unary", f.unary, "Concatenate question and perspective without a separator");
  app->add_option("--max-tokens", f.max_tokens, "Truncate sequences to this many tokens");
  app->add_option("--seed", f.seed, "Seed for initialization, shuffling and dropout");
}

void add_train_flags(CLI::App* app, Flags& f) {
  app->add_option("--epochs", f.epochs);
  app->add_option("--batch-size", f.batch_size);
  app->add_option("--lr", f.lr, "Adam learning rate");
  app->add_option("--patience", f.patience, "Early-stopping patience in epochs");
  f.consistency_opt = app->add_flag("--consistency", f.consistency, "Add the cosine consistency penalty");
  app->add_option("--consistency-weight", f.consistency_weight, "Weight of the consistency penalty");
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

RunConfig resolve(const Flags& f, const std::optional<fs::path>& implicit_config = std::nullopt) {
  RunConfig c = default_run_config();
  c.train.threads = thread_budget();
  if (!f.config_file.empty()) {
    merge_json(c, read_json_file(f.config_file));
  } else if (implicit_config && fs::exists(*implicit_config)) {
    merge_json(c, read_json_file(*implicit_config));
  }
  if (f.corpus) c.corpus = *f.corpus;
  if (f.corpus_format) c.corpus_format = *f.corpus_format;
  if (f.sentiment_lexicon) c.sentiment_lexicon = *f.sentiment_lexicon;
  if (f.emotion_lexicon) c.emotion_lexicon = *f.emotion_lexicon;
  if (f.embeddings) c.embeddings = *f.embeddings;
  if (f.fallback_dim) c.fallback_dim = *f.fallback_dim;
  if (f.out) c.out = *f.out;
  if (f.split) c.split = *f.split;
  if (f.affect) {
    const std::string a = ascii_lower(*f.affect);
    if (a == "sentiment") {
      c.model.sentiment_mode = true;
      c.model.emotion_mode = false;
    } else if (a == "emotion") {
      c.model.sentiment_mode = false;
      c.model.emotion_mode = true;
    } else if (a == "none") {
      c.model.sentiment_mode = false;
      c.model.emotion_mode = false;
    } else {
      throw ConfigError("--affect must be sentiment, emotion or none");
    }
  }
  if (f.hidden) c.model.hidden = *f.hidden;
  if (f.affect_dim) c.model.affect_dim = *f.affect_dim;
  if (f.dropout) c.model.dropout = *f.dropout;
  if (f.unidirectional_opt != nullptr && f.unidirectional_opt->count() > 0) c.model.bidirectional = false;
  if (f.unary_opt != nullptr && f.unary_opt->count() > 0) c.input.pair_mode = false;
  if (f.max_tokens) c.input.max_tokens = *f.max_tokens;
  if (f.seed) {
    c.model.seed = *f.seed;
    c.train.seed = *f.seed;
  }
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.batch_size) c.train.batch_size = *f.batch_size;
  if (f.lr) c.train.learning_rate = *f.lr;
  if (f.patience) c.train.patience = *f.patience;
  if (f.consistency_opt != nullptr && f.consistency_opt->count() > 0) c.train.consistency = true;
  if (f.consistency_weight) c.train.consistency_weight = *f.consistency_weight;
  return c;
}

CorpusFormat corpus_format_of(const std::string& s) {
  const std::string f = ascii_lower(s);
  if (f == "jsonl") return CorpusFormat::kJsonl;
  if (f == "csv") return CorpusFormat::kCsv;
  if (f == "tsv") return CorpusFormat::kTsv;
  throw ConfigError("unknown corpus format '" + s + "' (expected jsonl, csv or tsv)");
}

Split split_of(const std::string& s) {
  const auto split = parse_split(s);
  if (!split) throw ConfigError("unknown split '" + s + "' (expected train, dev or test)");
  return *split;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is required");
  if (!fs::is_regular_file(path)) throw DataError(what + " not found: " + path);
}

Corpus load_configured_corpus(const RunConfig& c) {
  require_file(c.corpus, "corpus");
  return load_corpus(c.corpus, corpus_format_of(c.corpus_format));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

// Lexicons, embedding store and vocabulary for one model configuration.
struct Resources {
  std::optional<SentimentLexicon> sentiment;
  std::optional<EmotionLexicon> emotion;
  std::optional<EmbeddingStore> store;
  Vocabulary vocab;

  EmbeddingSource source() const {
    EmbeddingSource s;
    if (store) {
      s.mode = EmbeddingMode::kContextual;
      s.store = &*store;
    } else {
      s.mode = EmbeddingMode::kFallback;
      s.vocab = &vocab;
    }
    return s;
  }
  const SentimentLexicon* sentiment_ptr() const { return sentiment ? &*sentiment : nullptr; }
  const EmotionLexicon* emotion_ptr() const { return emotion ? &*emotion : nullptr; }
};

void load_lexicons(const RunConfig& c, const ModelConfig& model, Resources& r) {
  if (model.sentiment_mode) {
    require_file(c.sentiment_lexicon, "sentiment lexicon");
    r.sentiment = load_sentiment_lexicon(c.sentiment_lexicon);
  }
  if (model.emotion_mode) {
    require_file(c.emotion_lexicon, "emotion lexicon");
    r.emotion = load_emotion_lexicon(c.emotion_lexicon);
  }
}

std::vector<Stance> golds_of(const std::vector<Example>& examples) {
  std::vector<Stance> g;
  for (const auto& e : examples) g.push_back(e.gold);
  return g;
}

std::string predictions_jsonl(const std::vector<Example>& examples, const std::vector<Stance>& preds) {
  std::string s;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    s += json{{"id", examples[i].id},
              {"pred", std::string(to_string(preds[i]))},
              {"gold", std::string(to_string(examples[i].gold))}}
             .dump();
    s += "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Flags& f, std::ostream& out) {
  const RunConfig c = resolve(f);
  const Corpus corpus = load_configured_corpus(c);
  if (c.out.empty()) throw ConfigError("ingest requires --out");
  if (fs::exists(c.out) && fs::equivalent(c.out, c.corpus)) {
    throw ConfigError("ingest would overwrite its input");
  }
  std::ostringstream buf;
  write_corpus(buf, corpus);
  write_text(c.out, buf.str());
  json counts = json::object();
  for (const auto& s : corpus_stats(corpus)) counts[std::string(to_string(s.split))] = s.total;
  out << json{{"instances", corpus.size()}, {"splits", counts}, {"out", c.out}}.dump(2) << "\n";
  return kExitOk;
}

int cmd_stats(const Flags& f, std::ostream& out) {
  const RunConfig c = resolve(f);
  const Corpus corpus = load_configured_corpus(c);
  json rows = json::array();
  for (const auto& s : corpus_stats(corpus)) {
    rows.push_back({{"split", std::string(to_string(s.split))},
                    {"topics", s.n_topics},
                    {"avg_words", s.avg_words},
                    {"pro", s.n_pro},
                    {"con", s.n_con},
                    {"total", s.total}});
  }
  out << rows.dump(2) << "\n";
  return kExitOk;
}

int cmd_annotate(const Flags& f, std::ostream& out) {
  const RunConfig c = resolve(f);
  const Corpus corpus = load_configured_corpus(c);
  require_file(c.sentiment_lexicon, "sentiment lexicon");
  const SentimentLexicon sentiment = load_sentiment_lexicon(c.sentiment_lexicon);
  std::optional<EmotionLexicon> emotion;
  if (!c.emotion_lexicon.empty()) {
    require_file(c.emotion_lexicon, "emotion lexicon");
    emotion = load_emotion_lexicon(c.emotion_lexicon);
  }
  std::string text;
  for (const auto& inst : corpus) {
    const TokenizedInstance tok = tokenize_instance(inst);
    const AffectAnnotation a = annotate(tok, &sentiment, emotion ? &*emotion : nullptr);
    json s = json::array(), e = json::array();
    for (auto l : a.sentiment_labels) s.push_back(std::string(to_string(l)));
    for (auto l : a.emotion_labels) e.push_back(std::string(to_string(l)));
    text += json{{"id", inst.id},
                 {"words", tok.words()},
                 {"question_words", tok.question_tokens.size()},
                 {"sentiment", s},
                 {"emotion", e},
                 {"sentence_scores", a.sentence_scores}}
                .dump();
    text += "\n";
  }
  if (c.out.empty()) {
    out << text;
  } else {
    write_text(c.out, text);
    out << json{{"instances", corpus.size()}, {"out", c.out}}.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_train(const Flags& f, std::ostream& out) {
  RunConfig c = resolve(f);
  if (c.out.empty()) throw ConfigError("train requires --out <run directory>");
  c.train.validate();
  const Corpus corpus = load_configured_corpus(c);
  Resources res;
  if (!c.embeddings.empty()) {
    require_file(c.embeddings, "embedding file");
    res.store = EmbeddingStore::open(c.embeddings);
    c.model.d_context = res.store->dim();
    c.model.fallback_vocab = 0;
  } else {
    if (c.fallback_dim == 0) throw ConfigError("fallback_dim must be positive without embeddings");
    c.model.d_context = c.fallback_dim;
    std::vector<TokenizedInstance> train_tok;
    for (const auto& inst : corpus) {
      if (inst.split == Split::kTrain) train_tok.push_back(tokenize_instance(inst));
    }
    res.vocab = build_vocabulary(train_tok, c.input.pair_mode);
    c.model.fallback_vocab = res.vocab.size();
  }
  c.model.validate();
  load_lexicons(c, c.model, res);
  c.input.question_only = c.train.effective_consistency_weight() > 0.0;

  const PreparedCorpus prepared =
      prepare_corpus(corpus, res.sentiment_ptr(), res.emotion_ptr(), res.source(), c.input);
  if (prepared.truncated_instances > 0) {
    warn(std::to_string(prepared.truncated_instances) + " instances truncated to " +
         std::to_string(c.input.max_tokens) + " tokens");
  }
  const auto train_set = select_split(corpus, prepared.examples, Split::kTrain);
  const auto dev_set = select_split(corpus, prepared.examples, Split::kDev);

  const fs::path run(c.out);
  fs::create_directories(run);
  write_text(run / "config.json", to_json(c).dump(2) + "\n");
  std::ofstream history(run / "history.jsonl", std::ios::trunc);
  if (!history) throw DataError("cannot write " + (run / "history.jsonl").string());

  json meta = {{"input", {{"pair_mode", c.input.pair_mode}, {"max_tokens", c.input.max_tokens}}},
               {"embedding_mode", res.store ? "contextual" : "fallback"}};
  if (!res.store) meta["vocabulary"] = res.vocab.tokens();

  TrainCallbacks cb;
  cb.on_epoch = [&history](const EpochRecord& r) { history << to_json(r).dump() << "\n" << std::flush; };
  cb.on_improvement = [&](const ModelParams& p, const EpochRecord& r) {
    json m = meta;
    m["epoch"] = r.epoch;
    m["dev_f1"] = r.dev.f1;
    save_checkpoint(run / "best.ckpt", c.model, p, m);
  };
  const TrainResult result = train(c.model, c.train, train_set, dev_set, cb);

  const auto best = result.history.epochs.at(result.history.best_epoch - 1);
  const json summary = {{"best_epoch", result.history.best_epoch},
                        {"epochs_run", result.history.epochs.size()},
                        {"stopped_early", result.history.stopped_early},
                        {"dev", to_json(best.dev)},
                        {"train_instances", train_set.size()},
                        {"dev_instances", dev_set.size()},
                        {"parameters", parameter_count(c.model)}};
  write_text(run / "summary.json", summary.dump(2) + "\n");
  out << summary.dump(2) << "\n";
  return kExitOk;
}

struct LoadedModel {
  RunConfig config;
  Checkpoint checkpoint;
  Resources resources;
};

LoadedModel load_model(const Flags& f, const std::string& run_dir, const std::string& checkpoint) {
  std::optional<fs::path> implicit;
  fs::path ckpt_path = checkpoint;
  if (!run_dir.empty()) {
    implicit = fs::path(run_dir) / "config.json";
    if (ckpt_path.empty()) ckpt_path = fs::path(run_dir) / "best.ckpt";
  }
  if (ckpt_path.empty()) throw ConfigError("either --run or --checkpoint is required");
  LoadedModel m;
  m.config = resolve(f, implicit);
  require_file(ckpt_path.string(), "checkpoint");
  m.checkpoint = load_checkpoint(ckpt_path);
  m.config.model = m.checkpoint.config;
  const json& meta = m.checkpoint.metadata;
  if (meta.contains("input")) {
    m.config.input.pair_mode = meta["input"].value("pair_mode", m.config.input.pair_mode);
    m.config.input.max_tokens = meta["input"].value("max_tokens", m.config.input.max_tokens);
  }
  m.config.input.question_only = false;
  if (m.config.model.fallback_vocab > 0) {
    if (!meta.contains("vocabulary")) throw DataError("checkpoint lacks the fallback vocabulary");
    m.resources.vocab = Vocabulary(meta.at("vocabulary").get<std::vector<std::string>>());
    if (m.resources.vocab.size() != m.config.model.fallback_vocab) {
      throw DataError("checkpoint vocabulary size does not match the token table");
    }
  } else {
    require_file(m.config.embeddings, "embedding file");
    m.resources.store = EmbeddingStore::open(m.config.embeddings);
    if (m.resources.store->dim() != m.config.model.d_context) {
      throw DataError("embedding dim " + std::to_string(m.resources.store->dim()) +
                      " does not match the model's " + std::to_string(m.config.model.d_context));
    }
  }
  load_lexicons(m.config, m.config.model, m.resources);
  return m;
}

int cmd_eval(const Flags& f, const std::string& run_dir, const std::string& checkpoint,
             const std::string& predictions_out, std::ostream& out) {
  LoadedModel m = load_model(f, run_dir, checkpoint);
  const Split split = split_of(m.config.split);
  const Corpus corpus = load_configured_corpus(m.config);
  const PreparedCorpus prepared = prepare_corpus(corpus, m.resources.sentiment_ptr(), m.resources.emotion_ptr(),
                                                 m.resources.source(), m.config.input);
  const auto examples = select_split(corpus, prepared.examples, split);
  if (examples.empty()) throw DataError("split '" + m.config.split + "' is empty");
  const auto preds = predict_all(m.checkpoint.params, m.config.model, examples, m.config.train.threads);
  json report = to_json(metrics_report(preds, golds_of(examples)));
  report["split"] = std::string(to_string(split));
  fs::path metrics_path, preds_path = predictions_out;
  if (!f.out || f.out->empty()) {
    if (!run_dir.empty()) metrics_path = fs::path(run_dir) / ("metrics_" + std::string(to_string(split)) + ".json");
  } else {
    metrics_path = *f.out;
  }
  if (preds_path.empty() && !run_dir.empty()) {
    preds_path = fs::path(run_dir) / ("predictions_" + std::string(to_string(split)) + ".jsonl");
  }
  if (!metrics_path.empty()) write_text(metrics_path, report.dump(2) + "\n");
  if (!preds_path.empty()) write_text(preds_path, predictions_jsonl(examples, preds));
  out << report.dump(2) << "\n";
  return kExitOk;
}

struct Prediction {
  Stance pred = Stance::kPro;
  std::optional<Stance> gold;
};

std::map<std::string, Prediction> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions file " + path.string());
  std::map<std::string, Prediction> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      Prediction rec;
      const auto p = parse_stance(j.at("pred").get<std::string>());
      if (!p) throw DataError("bad stance label");
      rec.pred = *p;
      if (j.contains("gold")) {
        rec.gold = parse_stance(j.at("gold").get<std::string>());
        if (!rec.gold) throw DataError("bad stance label");
      }
      const auto id = j.at("id").get<std::string>();
      if (!out.emplace(id, rec).second) throw DataError("duplicate id '" + id + "'");
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// Gold labels come from the corpus when one is given, otherwise from the files.
int cmd_mcnemar(const Flags& f, const std::string& a_path, const std::string& b_path,
                const std::vector<std::size_t>& counts, std::ostream& out) {
  McNemarResult r;
  if (!counts.empty()) {
    if (counts.size() != 2 || !a_path.empty() || !b_path.empty()) {
      throw ConfigError("use either --counts B C or --a/--b prediction files");
    }
    r = mcnemar_from_counts(counts[0], counts[1]);
  } else {
    if (a_path.empty() || b_path.empty()) throw ConfigError("mcnemar requires --a and --b");
    const RunConfig c = resolve(f);
    std::map<std::string, Stance> corpus_gold;
    if (!c.corpus.empty()) {
      for (const auto& inst : load_configured_corpus(c)) corpus_gold.emplace(inst.id, inst.stance);
    }
    const auto a = read_predictions(a_path);
    const auto b = read_predictions(b_path);
    if (a.size() != b.size()) throw DataError("prediction files cover different instance sets");
    std::vector<Stance> pa, pb, gold;
    for (const auto& [id, ra] : a) {
      const auto it = b.find(id);
      if (it == b.end()) throw DataError("instance '" + id + "' missing from " + b_path);
      const Prediction& rb = it->second;
      Stance g;
      if (!c.corpus.empty()) {
        const auto cg = corpus_gold.find(id);
        if (cg == corpus_gold.end()) throw DataError("instance '" + id + "' not in the corpus");
        g = cg->second;
      } else {
        if (!ra.gold || !rb.gold) throw ConfigError("predictions lack gold labels; pass --corpus");
        if (*ra.gold != *rb.gold) throw DataError("gold labels disagree for '" + id + "'");
        g = *ra.gold;
      }
      pa.push_back(ra.pred);
      pb.push_back(rb.pred);
      gold.push_back(g);
    }
    r = mcnemar_test(pa, pb, gold);
  }
  out << to_json(r).dump(2) << "\n";
  return kExitOk;
}

int cmd_explain(const Flags& f, const std::string& run_dir, const std::string& checkpoint,
                const std::string& id, const std::string& format, std::size_t top_k, std::ostream& out) {
  if (id.empty()) throw ConfigError("explain requires --id");
  const HeatmapFormat fmt = parse_heatmap_format(format);
  LoadedModel m = load_model(f, run_dir, checkpoint);
  const Corpus corpus = load_configured_corpus(m.config);
  const auto it = std::find_if(corpus.begin(), corpus.end(), [&](const Instance& i) { return i.id == id; });
  if (it == corpus.end()) throw DataError("instance '" + id + "' not in the corpus");
  const TokenizedInstance tok = tokenize_instance(*it);
  const AffectAnnotation aff = annotate(tok, m.resources.sentiment_ptr(), m.resources.emotion_ptr());
  const Example ex = build_example(tok, aff, m.resources.source(), m.config.input).example;
  const ForwardCache cache = classify_forward(ex.input, m.checkpoint.params, m.config.model);
  Engagement e = engagement_scores(cache, ex.input.tokens);
  e.top_k = top_tokens(e, top_k, true, ex.input.word_alignment);
  HeatmapContext ctx;
  ctx.instance_id = id;
  ctx.question = it->question;
  ctx.question_end = ex.question_end;
  ctx.predicted = static_cast<Stance>(predict(cache));
  ctx.gold = it->stance;
  const std::string doc = render_heatmap(e, ctx, fmt);
  if (f.out && !f.out->empty()) {
    write_text(*f.out, doc);
    json top = json::array();
    for (const auto& t : e.top_k) top.push_back({{"token", t.token}, {"score", t.score}});
    out << json{{"id", id},
                {"predicted", std::string(to_string(*ctx.predicted))},
                {"gold", std::string(to_string(*ctx.gold))},
                {"top_tokens", top},
                {"out", *f.out}}
               .dump(2)
        << "\n";
  } else {
    out << doc;
  }
  return kExitOk;
}

int cmd_profile(const Flags& f, const std::vector<std::string>& issues, std::ostream& out) {
  const RunConfig c = resolve(f);
  const Corpus corpus = load_configured_corpus(c);
  require_file(c.sentiment_lexicon, "sentiment lexicon");
  const SentimentLexicon lex = load_sentiment_lexicon(c.sentiment_lexicon);
  std::vector<TokenizedInstance> tok;
  std::vector<AffectAnnotation> ann;
  for (const auto& inst : corpus) {
    tok.push_back(tokenize_instance(inst));
    ann.push_back(annotate(tok.back(), &lex, nullptr));
  }
  json rows = json::array();
  for (const auto& p : sentiment_profile(corpus, tok, ann, issues)) rows.push_back(to_json(p));
  if (!c.out.empty()) write_text(c.out, rows.dump(2) + "\n");
  out << rows.dump(2) << "\n";
  return kExitOk;
}

int cmd_param_count(const Flags& f, std::ostream& out) {
  RunConfig c = resolve(f);
  if (f.fallback_dim) {
    c.model.d_context = *f.fallback_dim;
  }
  c.model.validate();
  const std::size_t closed = parameter_count(c.model);
  const std::size_t walked = allocated_parameter_count(ModelParams::zeros(c.model));
  out << json{{"model", to_json(c.model)}, {"parameter_count", closed}, {"allocated", walked}}.dump(2) << "\n";
  return closed == walked ? kExitOk : kExitNumeric;
}

int cmd_validate_embeddings(const Flags& f, bool require_question, std::ostream& out) {
  const RunConfig c = resolve(f);
  require_file(c.embeddings, "embedding file");
  json report = {{"file", c.embeddings}};
  std::vector<std::string> errors;
  std::optional<EmbeddingStore> store;
  try {
    store = EmbeddingStore::open(c.embeddings);
    report["records"] = store->size();
    report["dim"] = store->dim();
  } catch (const DataError& e) {
    errors.emplace_back(e.what());
  }
  if (store && !c.corpus.empty()) {
    const Corpus corpus = load_configured_corpus(c);
    for (const auto& inst : corpus) {
      const TokenizedInstance tok = tokenize_instance(inst);
      auto check = [&](const std::string& rid, std::size_t words) {
        if (!store->contains(rid)) {
          errors.push_back("missing record '" + rid + "'");
          return;
        }
        const EmbeddingRecord rec = store->get(rid);
        for (std::size_t t = 0; t < rec.word_alignment.size(); ++t) {
          const auto w = rec.word_alignment[t];
          if (w != kSpecialToken && static_cast<std::size_t>(w) >= words) {
            errors.push_back("record '" + rid + "' token " + std::to_string(t) + " aligns to word " +
                             std::to_string(w) + " of " + std::to_string(words));
            return;
          }
        }
      };
      check(inst.id, tok.word_count());
      if (require_question) check(inst.id + std::string(kQuestionRecordSuffix), tok.question_tokens.size());
    }
  }
  report["errors"] = errors;
  report["valid"] = errors.empty();
  out << report.dump(2) << "\n";
  return errors.empty() ? kExitOk : kExitData;
}

int cmd_make_fixture(std::uint64_t seed, std::size_t n, double strength, const std::string& path,
                     std::ostream& out) {
  if (path.empty()) throw ConfigError("make-fixture requires --out");
  if (!(strength >= 0.0 && strength <= 1.0)) throw ConfigError("--strength must lie in [0, 1]");
  const Corpus corpus = make_fixture(seed, n, strength);
  std::ostringstream buf;
  write_corpus(buf, corpus);
  write_text(path, buf.str());
  out << json{{"instances", corpus.size()}, {"seed", seed}, {"strength", strength}, {"out", path}}.dump(2)
      << "\n";
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Affect-enriched recurrent stance classifier", "stancelab"};
  app.require_subcommand(1);
  Flags f;

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and write it as normalized JSONL");
  add_data_flags(ingest, f);
  ingest->add_option("--out", f.out, "Output JSONL file");

  auto* stats = app.add_subcommand("stats", "Per-split corpus statistics");
  add_data_flags(stats, f);

  auto* annot = app.add_subcommand("annotate", "Per-word sentiment and emotion labels");
  add_data_flags(annot, f);
  annot->add_option("--out", f.out, "Output JSONL file (stdout when absent)");

  auto* train_cmd = app.add_subcommand("train", "Train a classifier into a run directory");
  add_data_flags(train_cmd, f);
  add_model_flags(train_cmd, f);
  add_train_flags(train_cmd, f);
  train_cmd->add_option("--out", f.out, "Run directory");

  std::string run_dir, checkpoint, predictions_out, id, format = "html";
  std::size_t top_k = 10;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained model on one split");
  add_data_flags(eval, f);
  eval->add_option("--embeddings", f.embeddings, "Contextual embedding file");
  eval->add_option("--run", run_dir, "Run directory written by train");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file (defaults to <run>/best.ckpt)");
  eval->add_option("--split", f.split, "train, dev or test");
  eval->add_option("--out", f.out, "Metrics JSON file");
  eval->add_option("--predictions", predictions_out, "Predictions JSONL file");

  std::string a_path, b_path;
  std::vector<std::size_t> counts;
  auto* mcn = app.add_subcommand("mcnemar", "McNemar's test between two prediction files");
  mcn->add_option("--corpus", f.corpus, "Corpus holding the gold labels");
  mcn->add_option("--corpus-format", f.corpus_format, "Corpus format");
  mcn->add_option("--a", a_path, "Predictions of system A");
  mcn->add_option("--b", b_path, "Predictions of system B");
  mcn->add_option("--counts", counts, "Discordant counts B C")->expected(2);

  auto* expl = app.add_subcommand("explain", "Max-pool engagement heatmap for one instance");
  add_data_flags(expl, f);
  expl->add_option("--embeddings", f.embeddings, "Contextual embedding file");
  expl->add_option("--run", run_dir, "Run directory written by train");
  expl->add_option("--checkpoint", checkpoint, "Checkpoint file");
  expl->add_option("--id", id, "Instance id");
  expl->add_option("--format", format, "json, html or ansi");
  expl->add_option("--top-k", top_k, "Number of top words to report")->check(CLI::PositiveNumber);
  expl->add_option("--out", f.out, "Output file (stdout when absent)");

  std::vector<std::string> issues;
  auto* prof = app.add_subcommand("profile", "Average perspective sentiment per issue and stance");
  add_data_flags(prof, f);
  prof->add_option("--issues", issues, "Topics to report (all when absent)")->delimiter(',');
  prof->add_option("--out", f.out, "Output JSON file");

  auto* pc = app.add_subcommand("param-count", "Trainable parameters of a model configuration");
  pc->add_option("--config", f.config_file, "JSON config file");
  add_model_flags(pc, f);

  bool require_question = false;
  auto* val = app.add_subcommand("validate-embeddings", "Check an embedding file");
  val->add_option("--config", f.config_file, "JSON config file");
  val->add_option("--embeddings", f.embeddings, "Embedding file");
  val->add_option("--corpus", f.corpus, "Corpus whose ids and word counts must match");
  val->add_option("--corpus-format", f.corpus_format, "Corpus format");
  val->add_flag("--require-question", require_question, "Also require <id>::question records");

  std::uint64_t fx_seed = 7;
  std::size_t fx_n = 200;
  double fx_strength = 1.0;
  std::string fx_out;
  auto* fx = app.add_subcommand("make-fixture", "Write a synthetic corpus");
  fx->add_option("--seed", fx_seed);
  fx->add_option("--n", fx_n, "Number of instances")->check(CLI::PositiveNumber);
  fx->add_option("--strength", fx_strength, "Probability that planted sentiment follows the stance");
  fx->add_option("--out", fx_out, "Output JSONL file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(f, out);
    if (stats->parsed()) return cmd_stats(f, out);
    if (annot->parsed()) return cmd_annotate(f, out);
    if (train_cmd->parsed()) return cmd_train(f, out);
    if (eval->parsed()) return cmd_eval(f, run_dir, checkpoint, predictions_out, out);
    if (mcn->parsed()) return cmd_mcnemar(f, a_path, b_path, counts, out);
    if (expl->parsed()) return cmd_explain(f, run_dir, checkpoint, id, format, top_k, out);
    if (prof->parsed()) return cmd_profile(f, issues, out);
    if (pc->parsed()) return cmd_param_count(f, out);
    if (val->parsed()) return cmd_validate_embeddings(f, require_question, out);
    if (fx->parsed()) return cmd_make_fixture(fx_seed, fx_n, fx_strength, fx_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace stancelab::cli
