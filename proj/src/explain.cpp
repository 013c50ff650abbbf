// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#include "stancelab/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "stancelab/error.hpp"
#include "stancelab/text.hpp"

namespace stancelab {

Engagement engagement_scores(const ForwardCache& cache, const std::vector<std::string>& tokens) {
  if (tokens.size() != cache.length()) {
    throw ConfigError("engagement_scores: " + std::to_string(tokens.size()) + " tokens for a " +
                      std::to_string(cache.length()) + "-step cache");
  }
  Engagement e;
  e.tokens = tokens;
  e.scores.assign(tokens.size(), 0);
  for (const std::size_t t : cache.argmax) ++e.scores.at(t);
  e.top_k = top_tokens(e, tokens.size(), false);
  return e;
}

std::vector<RankedToken> top_tokens(const Engagement& engagement, std::size_t k, bool merge_subtokens,
                                    const std::vector<std::int32_t>& word_alignment) {
  if (k == 0) throw ConfigError("top_tokens: k must be at least 1");
  std::vector<RankedToken> items;
  if (merge_subtokens) {
    if (word_alignment.size() != engagement.tokens.size()) {
      throw ConfigError("top_tokens: alignment length differs from token count");
    }
    std::map<std::int32_t, std::size_t> slot;  // word index -> position in items
    for (std::size_t i = 0; i < engagement.tokens.size(); ++i) {
      const auto w = word_alignment[i];
      if (w == kSpecialToken) {
        items.push_back({engagement.tokens[i], i, engagement.scores[i]});
        continue;
      }
      auto [it, fresh] = slot.try_emplace(w, items.size());
      if (fresh) {
        items.push_back({engagement.tokens[i], i, engagement.scores[i]});
      } else {
        auto& r = items[it->second];
        std::string piece = engagement.tokens[i];
        if (piece.starts_with("##")) piece.erase(0, 2);
        r.token += piece;
        r.score += engagement.scores[i];
      }
    }
  } else {
    for (std::size_t i = 0; i < engagement.tokens.size(); ++i) {
      items.push_back({engagement.tokens[i], i, engagement.scores[i]});
    }
  }
  std::stable_sort(items.begin(), items.end(), [](const RankedToken& a, const RankedToken& b) {
    return a.score != b.score ? a.score > b.score : a.position < b.position;
  });
  if (items.size() > k) items.resize(k);
  return items;
}

HeatmapFormat parse_heatmap_format(std::string_view s) {
  const std::string f = ascii_lower(s);
  if (f == "json") return HeatmapFormat::kJson;
  if (f == "html") return HeatmapFormat::kHtml;
  if (f == "ansi") return HeatmapFormat::kAnsi;
  throw ConfigError("unknown heatmap format '" + std::string(s) + "' (expected json, html or ansi)");
}

namespace {

std::vector<double> intensities(const Engagement& e) {
  const std::size_t top = e.scores.empty() ? 0 : *std::max_element(e.scores.begin(), e.scores.end());
  std::vector<double> out(e.scores.size(), 0.0);
  if (top == 0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<double>(e.scores[i]) / static_cast<double>(top);
  }
  return out;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

nlohmann::json optional_stance(const std::optional<Stance>& s) {
  return s ? nlohmann::json(std::string(to_string(*s))) : nlohmann::json(nullptr);
}

std::string render_json(const Engagement& e, const HeatmapContext& c) {
  nlohmann::json j;
  j["id"] = c.instance_id;
  j["tokens"] = e.tokens;
  j["scores"] = e.scores;
  j["question"] = c.question;
  j["question_end"] = c.question_end;
  j["predicted"] = optional_stance(c.predicted);
  j["gold"] = optional_stance(c.gold);
  return j.dump(2) + "\n";
}

std::string render_html(const Engagement& e, const HeatmapContext& c) {
  const auto level = intensities(e);
  std::string out;
  out += "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n";
  out += "<title>" + html_escape(c.instance_id) + "</title>\n";
  out += "<style>\n.tok{padding:1px 3px;margin:1px;display:inline-block;border-radius:2px}\n"
         ".question{border-bottom:2px solid #888}\n</style>\n</head>\n<body>\n";
  out += "<p class=\"meta\">id: " + html_escape(c.instance_id);
  if (c.predicted) out += " | predicted: " + std::string(to_string(*c.predicted));
  if (c.gold) out += " | gold: " + std::string(to_string(*c.gold));
  out += "</p>\n<div class=\"heatmap\">\n";
  for (std::size_t i = 0; i < e.tokens.size(); ++i) {
    const bool q = i < c.question_end;
    out += "<span class=\"tok" + std::string(q ? " question" : "") +
           "\" style=\"background-color:rgba(200,30,30," + fixed3(level[i]) + ")\" title=\"" +
           std::to_string(e.scores[i]) + "\">" + html_escape(e.tokens[i]) + "</span>\n";
  }
  out += "</div>\n</body>\n</html>\n";
  return out;
}

std::string render_ansi(const Engagement& e, const HeatmapContext& c) {
  const auto level = intensities(e);
  std::string out;
  for (std::size_t i = 0; i < e.tokens.size(); ++i) {
    if (i > 0) out += (i == c.question_end) ? " | " : " ";
    const int fade = static_cast<int>(std::lround(255.0 - 200.0 * level[i]));
    out += "\x1b[48;2;255;" + std::to_string(fade) + ";" + std::to_string(fade) + "m\x1b[30m" +
           e.tokens[i] + "\x1b[0m";
  }
  out += "\n";
  return out;
}

}  // namespace

std::string render_heatmap(const Engagement& engagement, const HeatmapContext& context,
                           HeatmapFormat format) {
  if (engagement.scores.size() != engagement.tokens.size()) {
    throw ConfigError("render_heatmap: score and token counts differ");
  }
  switch (format) {
    case HeatmapFormat::kJson: return render_json(engagement, context);
    case HeatmapFormat::kHtml: return render_html(engagement, context);
    case HeatmapFormat::kAnsi: return render_ansi(engagement, context);
  }
  throw ConfigError("render_heatmap: unknown format");
}

}  // namespace stancelab
