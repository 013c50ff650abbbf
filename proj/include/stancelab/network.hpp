// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "stancelab/affect.hpp"
#include "stancelab/corpus.hpp"

namespace stancelab {

inline constexpr int kNumClasses = 2;  // class index == static_cast<int>(Stance)

struct ModelConfig {
  std::size_t d_context = 768;
  bool sentiment_mode = true;
  bool emotion_mode = false;
  bool bidirectional = true;
  std::size_t hidden = 384;  // per direction
  std::size_t affect_dim = 768;
  std::uint64_t seed = 0;
  // Rows of the trainable token table; 0 means contextual (frozen) inputs.
  std::size_t fallback_vocab = 0;
  double dropout = 0.0;  // on the pooled vector, training only

  void validate() const;
  bool affect_enabled() const { return sentiment_mode || emotion_mode; }
  std::size_t input_dim() const { return d_context + (affect_enabled() ? affect_dim : 0); }
  std::size_t state_dim() const { return hidden * (bidirectional ? 2 : 1); }
  std::size_t pooled_dim() const { return 3 * state_dim(); }
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Update/reset/candidate gates of one recurrent direction. Input weights are
/// hidden x input, recurrent weights hidden x hidden.
struct GruCell {
  Eigen::MatrixXd w_update, u_update;
  Eigen::VectorXd b_update;
  Eigen::MatrixXd w_reset, u_reset;
  Eigen::VectorXd b_reset;
  Eigen::MatrixXd w_candidate, u_candidate;
  Eigen::VectorXd b_candidate;

  static GruCell zeros(std::size_t input, std::size_t hidden);
  std::size_t hidden() const { return static_cast<std::size_t>(b_update.size()); }

  template <typename Self, typename F>
  static void visit_impl(Self& self, std::string_view prefix, F&& f) {
    const std::string p(prefix);
    f(p + "w_update", self.w_update);
    f(p + "u_update", self.u_update);
    f(p + "b_update", self.b_update);
    f(p + "w_reset", self.w_reset);
    f(p + "u_reset", self.u_reset);
    f(p + "b_reset", self.b_reset);
    f(p + "w_candidate", self.w_candidate);
    f(p + "u_candidate", self.u_candidate);
    f(p + "b_candidate", self.b_candidate);
  }
};

/// All trainable tensors. Tensors not used by a configuration are left empty
/// and skipped by `visit`. The same type holds gradients and Adam moments.
struct ModelParams {
  Eigen::MatrixXd sentiment_embedding;  // 3 x affect_dim
  Eigen::MatrixXd emotion_embedding;    // 9 x affect_dim
  Eigen::MatrixXd token_table;          // fallback_vocab x d_context
  GruCell forward_cell;
  GruCell backward_cell;
  Eigen::MatrixXd head_weight;  // 2 x pooled_dim
  Eigen::VectorXd head_bias;    // 2

  static ModelParams zeros(const ModelConfig& config);
  static ModelParams initialize(const ModelConfig& config);

  /// Calls f(name, tensor) for every allocated tensor in declaration order.
  template <typename F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <typename F>
  void visit(F&& f) const { visit_impl(*this, f); }

  void set_zero();
  bool all_finite() const;

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    auto g = [&f](const std::string& name, auto& t) {
      if (t.size() > 0) f(name, t);
    };
    g("sentiment_embedding", self.sentiment_embedding);
    g("emotion_embedding", self.emotion_embedding);
    g("token_table", self.token_table);
    GruCell::visit_impl(self.forward_cell, "forward.", g);
    GruCell::visit_impl(self.backward_cell, "backward.", g);
    g("head_weight", self.head_weight);
    g("head_bias", self.head_bias);
  }
};

/// One token sequence as the network consumes it. Exactly one of `context`
/// (frozen T x d_context states) or `token_ids` (fallback rows) is populated.
struct SequenceInput {
  std::vector<std::string> tokens;
  std::vector<std::int32_t> word_alignment;
  Eigen::MatrixXd context;
  std::vector<std::int32_t> token_ids;
  std::vector<SentimentLabel> sentiment;
  std::vector<Emotion> emotion;

  std::size_t length() const { return tokens.size(); }
};

struct DirectionCache {
  Eigen::MatrixXd states;      // (T+1) x h, row 0 is the zero initial state, in scan order
  Eigen::MatrixXd update;      // T x h
  Eigen::MatrixXd reset;       // T x h
  Eigen::MatrixXd candidate;   // T x h
  Eigen::MatrixXd recurrent;   // T x h, u_candidate * h_prev
};

struct ForwardCache {
  Eigen::MatrixXd inputs;  // T x input_dim
  Eigen::MatrixXd states;  // T x state_dim
  std::vector<std::size_t> argmax;  // per state column: smallest token index attaining the max
  Eigen::VectorXd pooled;           // [avg; max; last]
  Eigen::VectorXd dropout_mask;     // empty when dropout is off
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
  DirectionCache forward;
  DirectionCache backward;
  std::vector<std::int32_t> token_ids;
  std::vector<SentimentLabel> sentiment;
  std::vector<Emotion> emotion;

  std::size_t length() const { return static_cast<std::size_t>(states.rows()); }
};

Eigen::VectorXd gru_step(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev, const GruCell& cell);

/// States of a (bi)directional GRU from zero initial state; T x h or T x 2h.
/// The backward block at row t holds the reverse scan's state after reading x_T..x_t.
Eigen::MatrixXd run_gru(const Eigen::MatrixXd& inputs, const GruCell& forward_cell,
                        const GruCell* backward_cell);

struct Pooled {
  Eigen::VectorXd u;
  std::vector<std::size_t> argmax;
};
Pooled pool_and_assemble(const Eigen::MatrixXd& states);

/// x_t = [context_t ; affect embedding of the token's label] -> GRU -> pooling -> softmax.
/// Pass `rng` only in training to enable dropout.
ForwardCache classify_forward(const SequenceInput& input, const ModelParams& params,
                              const ModelConfig& config, std::mt19937_64* rng = nullptr);

/// Accumulates into `grads` the gradient of a loss whose derivative w.r.t. the
/// logits is `d_logits` plus `d_pooled_extra` w.r.t. the pre-dropout pooled vector.
void backward_accumulate(const ForwardCache& cache, const Eigen::VectorXd& d_logits,
                         const Eigen::VectorXd* d_pooled_extra, const ModelParams& params,
                         const ModelConfig& config, ModelParams& grads);

/// Cross-entropy gradients for a single cache.
ModelParams backward(const ForwardCache& cache, int gold, const ModelParams& params,
                     const ModelConfig& config);

/// Cosine consistency term: 1 - cos for pro, max(0, cos) for con; 0 on zero-norm input.
double consistency_penalty(const Eigen::VectorXd& u_question, const Eigen::VectorXd& u_pair,
                           Stance label);
/// Gradients of consistency_penalty w.r.t. both arguments.
std::pair<Eigen::VectorXd, Eigen::VectorXd> consistency_penalty_gradient(
    const Eigen::VectorXd& u_question, const Eigen::VectorXd& u_pair, Stance label);

/// A labelled training unit: the full sequence plus, for the consistency
/// penalty, the question-only sequence.
struct Example {
  std::string id;
  SequenceInput input;
  std::optional<SequenceInput> question_only;
  Stance gold = Stance::kPro;
  std::size_t question_end = 0;  // sequence positions [0, question_end) belong to the question
};

struct ExampleResult {
  double loss = 0.0;
  double cross_entropy = 0.0;
  double penalty = 0.0;
  int prediction = 0;
};

/// Loss (cross-entropy + weight * consistency) and optionally its gradient,
/// scaled by `grad_scale`, accumulated into `grads`.
ExampleResult example_loss(const Example& example, const ModelParams& params,
                           const ModelConfig& config, double consistency_weight,
                           ModelParams* grads = nullptr, double grad_scale = 1.0,
                           std::mt19937_64* rng = nullptr);

int predict(const ForwardCache& cache);

struct GradientCheckOptions {
  double eps = 1e-5;
  std::size_t min_coordinates = 200;
  double absolute_floor = 1e-10;
  double consistency_weight = 0.0;
  std::uint64_t sample_seed = 0;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // both gradients below the absolute floor
};

using AnalyticGradientFn = std::function<ModelParams(const Example&, const ModelParams&)>;

/// Compares analytic gradients with central finite differences on a sample of
/// coordinates covering every tensor. `analytic` overrides the backward pass.
GradientCheckResult gradient_check(const ModelParams& params, const ModelConfig& config,
                                   const Example& example, const GradientCheckOptions& options = {},
                                   const AnalyticGradientFn& analytic = {});

/// Closed-form trainable parameter total.
std::size_t parameter_count(const ModelConfig& config);
/// Scalars actually allocated in `params`.
std::size_t allocated_parameter_count(const ModelParams& params);

/// Checkpoint: u64 header length, JSON header {"model": config, ...metadata},
/// then every tensor in declaration order as little-endian f64.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams& params, const nlohmann::json& metadata = nlohmann::json::object());

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  nlohmann::json metadata;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace stancelab
