// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stancelab/affect.hpp"
#include "stancelab/corpus.hpp"

namespace stancelab {

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Stance positive_class = Stance::kPro;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

double f1_from(double precision, double recall);

Metrics compute_metrics(std::span<const Stance> preds, std::span<const Stance> golds,
                        Stance positive_class = Stance::kPro);

struct MetricsReport {
  Metrics pro;
  Metrics con;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

/// Both per-class views plus macro averages.
MetricsReport metrics_report(std::span<const Stance> preds, std::span<const Stance> golds);
nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const MetricsReport& r);

struct McNemarResult {
  std::size_t b = 0;  // A right, B wrong
  std::size_t c = 0;  // A wrong, B right
  double chi2_statistic = 0.0;  // continuity-corrected; 0 when undefined
  bool chi2_defined = false;
  double p_exact = 1.0;  // two-sided binomial
  double p_chi2 = 1.0;
};

/// Exact two-sided binomial p-value for discordant counts b and c.
double mcnemar_exact_p(std::size_t b, std::size_t c);
McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c);
McNemarResult mcnemar_test(std::span<const Stance> preds_a, std::span<const Stance> preds_b,
                           std::span<const Stance> golds);
nlohmann::json to_json(const McNemarResult& r);

struct IssueProfile {
  std::string topic;
  std::optional<double> pro_avg;  // absent when the issue has no pro perspectives
  std::optional<double> con_avg;
  std::size_t pro_sentences = 0;
  std::size_t con_sentences = 0;
};

/// Mean compound score of perspective sentences per issue and stance. An empty
/// filter reports every issue (sorted by topic).
std::vector<IssueProfile> sentiment_profile(const Corpus& corpus,
                                            const std::vector<TokenizedInstance>& tokenized,
                                            const std::vector<AffectAnnotation>& annotations,
                                            const std::vector<std::string>& issue_filter = {});
nlohmann::json to_json(const IssueProfile& p);

}  // namespace stancelab
