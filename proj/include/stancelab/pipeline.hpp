// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <string>
#include <vector>

#include "stancelab/affect.hpp"
#include "stancelab/corpus.hpp"
#include "stancelab/embeddings.hpp"
#include "stancelab/network.hpp"

// Assembles network inputs from instances, affect labels and an embedding source.
namespace stancelab {

inline constexpr std::string_view kSeparatorToken = "[SEP]";
inline constexpr std::string_view kQuestionRecordSuffix = "::question";

struct InputOptions {
  bool pair_mode = true;        // question [SEP] perspective; otherwise plain concatenation
  std::size_t max_tokens = 512;  // tail truncation
  bool question_only = false;   // also build the question-only sequence
};

struct EmbeddingSource {
  EmbeddingMode mode = EmbeddingMode::kFallback;
  const EmbeddingStore* store = nullptr;  // contextual
  const Vocabulary* vocab = nullptr;      // fallback
};

/// Token sequence of one instance in fallback mode: words with alignment.
struct WordLayout {
  std::vector<std::string> tokens;
  std::vector<std::int32_t> word_alignment;
};
WordLayout word_layout(const TokenizedInstance& instance, bool pair_mode);

struct BuiltExample {
  Example example;
  std::size_t truncated_tokens = 0;
};

/// Sub-tokens inherit their source word's affect labels; special tokens are neutral.
BuiltExample build_example(const TokenizedInstance& instance, const AffectAnnotation& affect,
                           const EmbeddingSource& source, const InputOptions& options);

/// Vocabulary of the fallback table from the training instances' tokens.
Vocabulary build_vocabulary(const std::vector<TokenizedInstance>& instances, bool pair_mode);

struct PreparedCorpus {
  std::vector<TokenizedInstance> tokenized;
  std::vector<AffectAnnotation> affect;
  std::vector<Example> examples;  // aligned with the corpus
  std::size_t truncated_instances = 0;
};

PreparedCorpus prepare_corpus(const Corpus& corpus, const SentimentLexicon* sentiment,
                              const EmotionLexicon* emotion, const EmbeddingSource& source,
                              const InputOptions& options);

std::vector<Example> select_split(const Corpus& corpus, const std::vector<Example>& examples,
                                  Split split);

}  // namespace stancelab
