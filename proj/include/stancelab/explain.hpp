// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stancelab/corpus.hpp"
#include "stancelab/embeddings.hpp"
#include "stancelab/network.hpp"

namespace stancelab {

struct RankedToken {
  std::string token;
  std::size_t position = 0;  // first sequence position (or word index when merged)
  std::size_t score = 0;
};

struct Engagement {
  std::vector<std::string> tokens;
  std::vector<std::size_t> scores;  // max-pool columns won per token; sums to the state width
  std::vector<RankedToken> top_k;
};

/// Counts, per token, how many max-pool columns it wins.
Engagement engagement_scores(const ForwardCache& cache, const std::vector<std::string>& tokens);

/// Ranks tokens by score, ties by earliest position. With `merge_subtokens`,
/// scores of tokens sharing a word index are summed and joined into that word
/// (special tokens with alignment -1 stay separate).
std::vector<RankedToken> top_tokens(const Engagement& engagement, std::size_t k, bool merge_subtokens,
                                    const std::vector<std::int32_t>& word_alignment = {});

enum class HeatmapFormat { kJson, kHtml, kAnsi };
HeatmapFormat parse_heatmap_format(std::string_view s);

struct HeatmapContext {
  std::string instance_id;
  std::string question;
  std::size_t question_end = 0;  // tokens [0, question_end) come from the question
  std::optional<Stance> predicted;
  std::optional<Stance> gold;
};

std::string render_heatmap(const Engagement& engagement, const HeatmapContext& context,
                           HeatmapFormat format);

}  // namespace stancelab
