// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#include "stancelab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "stancelab/error.hpp"

namespace stancelab {

using nlohmann::json;

double f1_from(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Metrics compute_metrics(std::span<const Stance> preds, std::span<const Stance> golds,
                        Stance positive_class) {
  if (preds.size() != golds.size()) {
    throw ConfigError("compute_metrics: " + std::to_string(preds.size()) + " predictions for " +
                      std::to_string(golds.size()) + " gold labels");
  }
  if (preds.empty()) throw ConfigError("compute_metrics: no predictions");
  Metrics m;
  m.positive_class = positive_class;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == positive_class;
    const bool g = golds[i] == positive_class;
    if (p && g) ++m.tp;
    else if (p) ++m.fp;
    else if (g) ++m.fn;
    else ++m.tn;
  }
  m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  m.f1 = f1_from(m.precision, m.recall);
  return m;
}

MetricsReport metrics_report(std::span<const Stance> preds, std::span<const Stance> golds) {
  MetricsReport r;
  r.pro = compute_metrics(preds, golds, Stance::kPro);
  r.con = compute_metrics(preds, golds, Stance::kCon);
  r.macro_precision = (r.pro.precision + r.con.precision) / 2.0;
  r.macro_recall = (r.pro.recall + r.con.recall) / 2.0;
  r.macro_f1 = (r.pro.f1 + r.con.f1) / 2.0;
  r.accuracy = static_cast<double>(r.pro.tp + r.pro.tn) / static_cast<double>(preds.size());
  return r;
}

json to_json(const Metrics& m) {
  return {{"positive_class", to_string(m.positive_class)},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"tp", m.tp},
          {"fp", m.fp},
          {"fn", m.fn},
          {"tn", m.tn}};
}

json to_json(const MetricsReport& r) {
  return {{"pro", to_json(r.pro)},
          {"con", to_json(r.con)},
          {"macro", {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}}},
          {"accuracy", r.accuracy},
          {"count", r.pro.tp + r.pro.fp + r.pro.fn + r.pro.tn}};
}

double mcnemar_exact_p(std::size_t b, std::size_t c) {
  const std::size_t n = b + c;
  if (n == 0) return 1.0;
  const std::size_t k_max = std::min(b, c);
  if (n <= 60) {
    // Exact integer tail; C(n, k) <= 2^60 and the tail sum stays below 2^63.
    std::uint64_t choose = 1, tail = 0;
    for (std::size_t k = 0; k <= k_max; ++k) {
      tail += choose;
      choose = choose * (n - k) / (k + 1);
    }
    return std::min(1.0, 2.0 * std::ldexp(static_cast<double>(tail), -static_cast<int>(n)));
  }
  // Sum C(n, k) / 2^n for k <= k_max in log space.
  const double log_total = static_cast<double>(n) * std::log(2.0);
  const double log_n_fact = std::lgamma(static_cast<double>(n) + 1.0);
  double tail = 0.0;
  for (std::size_t k = 0; k <= k_max; ++k) {
    const double log_choose = log_n_fact - std::lgamma(static_cast<double>(k) + 1.0) -
                              std::lgamma(static_cast<double>(n - k) + 1.0);
    tail += std::exp(log_choose - log_total);
  }
  return std::min(1.0, 2.0 * tail);
}

McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c) {
  McNemarResult r;
  r.b = b;
  r.c = c;
  r.p_exact = mcnemar_exact_p(b, c);
  if (b + c > 0) {
    const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
    r.chi2_statistic = diff * diff / static_cast<double>(b + c);
    r.chi2_defined = true;
    // Survival function of chi-squared with one degree of freedom.
    r.p_chi2 = std::erfc(std::sqrt(r.chi2_statistic / 2.0));
  }
  return r;
}

McNemarResult mcnemar_test(std::span<const Stance> preds_a, std::span<const Stance> preds_b,
                           std::span<const Stance> golds) {
  if (preds_a.size() != golds.size() || preds_b.size() != golds.size()) {
    throw ConfigError("mcnemar_test: prediction and gold lengths differ");
  }
  std::size_t b = 0, c = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const bool a_ok = preds_a[i] == golds[i];
    const bool b_ok = preds_b[i] == golds[i];
    if (a_ok && !b_ok) ++b;
    if (!a_ok && b_ok) ++c;
  }
  return mcnemar_from_counts(b, c);
}

json to_json(const McNemarResult& r) {
  return {{"b", r.b},
          {"c", r.c},
          {"chi2_statistic", r.chi2_statistic},
          {"chi2_defined", r.chi2_defined},
          {"p_exact", r.p_exact},
          {"p_chi2", r.p_chi2}};
}

std::vector<IssueProfile> sentiment_profile(const Corpus& corpus,
                                            const std::vector<TokenizedInstance>& tokenized,
                                            const std::vector<AffectAnnotation>& annotations,
                                            const std::vector<std::string>& issue_filter) {
  if (tokenized.size() != corpus.size() || annotations.size() != corpus.size()) {
    throw ConfigError("sentiment_profile: corpus and annotations are not aligned");
  }
  const std::set<std::string> filter(issue_filter.begin(), issue_filter.end());
  struct Acc {
    double pro_sum = 0.0, con_sum = 0.0;
    std::size_t pro_n = 0, con_n = 0;
  };
  std::map<std::string, Acc> acc;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& inst = corpus[i];
    if (!filter.empty() && !filter.contains(inst.topic)) continue;
    const auto& tok = tokenized[i];
    const auto& ann = annotations[i];
    if (ann.sentence_scores.size() != tok.sentences.size()) {
      throw ConfigError("sentiment_profile: instance '" + inst.id + "' lacks sentence scores");
    }
    auto& a = acc[inst.topic];
    const std::size_t q_words = tok.question_tokens.size();
    for (std::size_t s = 0; s < tok.sentences.size(); ++s) {
      if (tok.sentences[s].tokens.begin < q_words) continue;  // question sentence
      if (inst.stance == Stance::kPro) {
        a.pro_sum += ann.sentence_scores[s];
        ++a.pro_n;
      } else {
        a.con_sum += ann.sentence_scores[s];
        ++a.con_n;
      }
    }
  }
  std::vector<IssueProfile> out;
  for (const auto& [topic, a] : acc) {
    IssueProfile p;
    p.topic = topic;
    p.pro_sentences = a.pro_n;
    p.con_sentences = a.con_n;
    if (a.pro_n > 0) p.pro_avg = a.pro_sum / static_cast<double>(a.pro_n);
    if (a.con_n > 0) p.con_avg = a.con_sum / static_cast<double>(a.con_n);
    out.push_back(std::move(p));
  }
  return out;
}

json to_json(const IssueProfile& p) {
  json j = {{"topic", p.topic}, {"pro_sentences", p.pro_sentences}, {"con_sentences", p.con_sentences}};
  j["pro_avg"] = p.pro_avg ? json(*p.pro_avg) : json(nullptr);
  j["con_avg"] = p.con_avg ? json(*p.con_avg) : json(nullptr);
  return j;
}

}  // namespace stancelab
