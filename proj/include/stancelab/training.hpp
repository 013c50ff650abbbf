// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "stancelab/evaluation.hpp"
#include "stancelab/network.hpp"

namespace stancelab {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  bool consistency = false;  // add the cosine consistency penalty
  double consistency_weight = 1.0;
  std::size_t threads = 1;

  void validate() const;
  double effective_consistency_weight() const { return consistency ? consistency_weight : 0.0; }
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  Metrics dev;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_dev_f1 = 0.0;
  bool stopped_early = false;
};

nlohmann::json to_json(const EpochRecord& record);

/// -log p(gold), with p clamped at 1e-12 (warning emitted when clamped).
double cross_entropy_loss(const Eigen::VectorXd& probs, int gold);
double mean_cross_entropy(std::span<const Eigen::VectorXd> probs, std::span<const int> golds);

/// Bias-corrected Adam over every tensor of a ModelParams.
class AdamOptimizer {
 public:
  AdamOptimizer(const TrainConfig& config, const ModelParams& like);

  /// Throws NumericError naming the first tensor with a non-finite gradient.
  void step(ModelParams& params, const ModelParams& grads);
  std::size_t steps() const { return step_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t step_ = 0;
  ModelParams first_;
  ModelParams second_;
};

/// Tracks the best dev F1 (strict improvement; ties keep the earlier epoch)
/// and signals when `patience` consecutive epochs passed without improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when `f1` improves on the best so far.
  bool observe(std::size_t epoch, double f1);
  bool should_stop() const { return since_best_ >= patience_ && best_epoch_ > 0; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_f1() const { return best_f1_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_f1_ = -1.0;
  std::size_t since_best_ = 0;
};

struct TrainCallbacks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const ModelParams&, const EpochRecord&)> on_improvement;
};

struct TrainResult {
  ModelParams params;  // from the best dev-F1 epoch
  TrainHistory history;
};

TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config,
                  const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                  const TrainCallbacks& callbacks = {},
                  std::optional<ModelParams> initial_params = std::nullopt);

std::vector<Stance> predict_all(const ModelParams& params, const ModelConfig& config,
                                const std::vector<Example>& examples, std::size_t threads = 1);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace stancelab
