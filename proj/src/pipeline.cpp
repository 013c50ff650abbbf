// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#include "stancelab/pipeline.hpp"

#include "stancelab/error.hpp"

namespace stancelab {

WordLayout word_layout(const TokenizedInstance& instance, bool pair_mode) {
  WordLayout out;
  std::int32_t w = 0;
  for (const auto& t : instance.question_tokens) {
    out.tokens.push_back(t);
    out.word_alignment.push_back(w++);
  }
  if (pair_mode) {
    out.tokens.emplace_back(kSeparatorToken);
    out.word_alignment.push_back(kSpecialToken);
  }
  for (const auto& t : instance.perspective_tokens) {
    out.tokens.push_back(t);
    out.word_alignment.push_back(w++);
  }
  return out;
}

namespace {

SequenceInput assemble(SequenceEmbedding emb, const AffectAnnotation& affect,
                       std::size_t word_count, const std::string& id) {
  SequenceInput in;
  const std::size_t t_len = emb.tokens.size();
  in.sentiment.reserve(t_len);
  in.emotion.reserve(t_len);
  for (std::size_t i = 0; i < t_len; ++i) {
    const auto w = emb.word_alignment[i];
    if (w == kSpecialToken) {
      in.sentiment.push_back(SentimentLabel::kNeutral);
      in.emotion.push_back(Emotion::kNeutral);
      continue;
    }
    if (w < 0 || static_cast<std::size_t>(w) >= word_count) {
      throw DataError("instance '" + id + "': token " + std::to_string(i) +
                      " aligns to word " + std::to_string(w) + " but the instance has " +
                      std::to_string(word_count) + " words");
    }
    in.sentiment.push_back(affect.sentiment_labels[static_cast<std::size_t>(w)]);
    in.emotion.push_back(affect.emotion_labels[static_cast<std::size_t>(w)]);
  }
  in.tokens = std::move(emb.tokens);
  in.word_alignment = std::move(emb.word_alignment);
  in.context = std::move(emb.context);
  in.token_ids = std::move(emb.token_ids);
  return in;
}

std::size_t truncate(SequenceInput& in, std::size_t max_tokens) {
  const std::size_t t_len = in.length();
  if (max_tokens == 0 || t_len <= max_tokens) return 0;
  in.tokens.resize(max_tokens);
  in.word_alignment.resize(max_tokens);
  in.sentiment.resize(max_tokens);
  in.emotion.resize(max_tokens);
  if (!in.token_ids.empty()) in.token_ids.resize(max_tokens);
  if (in.context.rows() > 0) {
    in.context.conservativeResize(static_cast<Eigen::Index>(max_tokens), Eigen::NoChange);
  }
  return t_len - max_tokens;
}

SequenceEmbedding embed(const EmbeddingSource& source, const std::string& record_id,
                        const WordLayout& layout) {
  if (source.mode == EmbeddingMode::kContextual) {
    if (source.store == nullptr) throw ConfigError("contextual mode requires an embedding store");
    return contextual_embedding(*source.store, record_id);
  }
  if (source.vocab == nullptr) throw ConfigError("fallback mode requires a vocabulary");
  return fallback_embedding(layout.tokens, layout.word_alignment, *source.vocab);
}

}  // namespace

BuiltExample build_example(const TokenizedInstance& instance, const AffectAnnotation& affect,
                           const EmbeddingSource& source, const InputOptions& options) {
  const std::size_t words = instance.word_count();
  if (affect.sentiment_labels.size() != words || affect.emotion_labels.size() != words) {
    throw ConfigError("affect labels do not match the word count of '" + instance.instance.id + "'");
  }
  BuiltExample out;
  Example& ex = out.example;
  ex.id = instance.instance.id;
  ex.gold = instance.instance.stance;

  const WordLayout layout = word_layout(instance, options.pair_mode);
  ex.input = assemble(embed(source, ex.id, layout), affect, words, ex.id);
  out.truncated_tokens = truncate(ex.input, options.max_tokens);

  const auto q_words = static_cast<std::int32_t>(instance.question_tokens.size());
  ex.question_end = ex.input.length();
  for (std::size_t i = 0; i < ex.input.length(); ++i) {
    if (ex.input.word_alignment[i] >= q_words) {
      ex.question_end = i;
      break;
    }
  }
  if (options.question_only) {
    WordLayout q;
    for (std::int32_t w = 0; w < q_words; ++w) {
      q.tokens.push_back(instance.question_tokens[static_cast<std::size_t>(w)]);
      q.word_alignment.push_back(w);
    }
    SequenceInput qi = assemble(embed(source, ex.id + std::string(kQuestionRecordSuffix), q),
                                affect, words, ex.id);
    truncate(qi, options.max_tokens);
    ex.question_only = std::move(qi);
  }
  return out;
}

Vocabulary build_vocabulary(const std::vector<TokenizedInstance>& instances, bool pair_mode) {
  Vocabulary vocab;
  for (const auto& inst : instances) {
    for (const auto& t : word_layout(inst, pair_mode).tokens) vocab.add(t);
  }
  return vocab;
}

PreparedCorpus prepare_corpus(const Corpus& corpus, const SentimentLexicon* sentiment,
                              const EmotionLexicon* emotion, const EmbeddingSource& source,
                              const InputOptions& options) {
  PreparedCorpus out;
  out.tokenized.reserve(corpus.size());
  out.affect.reserve(corpus.size());
  out.examples.reserve(corpus.size());
  for (const auto& inst : corpus) {
    out.tokenized.push_back(tokenize_instance(inst));
    out.affect.push_back(annotate(out.tokenized.back(), sentiment, emotion));
    auto built = build_example(out.tokenized.back(), out.affect.back(), source, options);
    if (built.truncated_tokens > 0) ++out.truncated_instances;
    out.examples.push_back(std::move(built.example));
  }
  return out;
}

std::vector<Example> select_split(const Corpus& corpus, const std::vector<Example>& examples,
                                  Split split) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].split == split) out.push_back(examples[i]);
  }
  return out;
}

}  // namespace stancelab
