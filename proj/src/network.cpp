// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#include "stancelab/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "stancelab/binary_io.hpp"
#include "stancelab/error.hpp"
#include "stancelab/log.hpp"

namespace stancelab {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void ModelConfig::validate() const {
  if (hidden == 0) throw ConfigError("hidden size must be positive");
  if (d_context == 0) throw ConfigError("d_context must be positive");
  if (sentiment_mode && emotion_mode) {
    throw ConfigError("sentiment and emotion modes are mutually exclusive");
  }
  if (affect_enabled() && affect_dim == 0) throw ConfigError("affect_dim must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

json to_json(const ModelConfig& c) {
  return {{"d_context", c.d_context},
          {"sentiment_mode", c.sentiment_mode},
          {"emotion_mode", c.emotion_mode},
          {"bidirectional", c.bidirectional},
          {"hidden", c.hidden},
          {"affect_dim", c.affect_dim},
          {"seed", c.seed},
          {"fallback_vocab", c.fallback_vocab},
          {"dropout", c.dropout}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.d_context = j.value("d_context", c.d_context);
  c.sentiment_mode = j.value("sentiment_mode", c.sentiment_mode);
  c.emotion_mode = j.value("emotion_mode", c.emotion_mode);
  c.bidirectional = j.value("bidirectional", c.bidirectional);
  c.hidden = j.value("hidden", c.hidden);
  c.affect_dim = j.value("affect_dim", c.affect_dim);
  c.seed = j.value("seed", c.seed);
  c.fallback_vocab = j.value("fallback_vocab", c.fallback_vocab);
  c.dropout = j.value("dropout", c.dropout);
  return c;
}

// ---------------------------------------------------------------------------
// Parameters

GruCell GruCell::zeros(std::size_t input, std::size_t hidden) {
  const auto in = static_cast<Eigen::Index>(input);
  const auto h = static_cast<Eigen::Index>(hidden);
  GruCell c;
  c.w_update = MatrixXd::Zero(h, in);
  c.u_update = MatrixXd::Zero(h, h);
  c.b_update = VectorXd::Zero(h);
  c.w_reset = MatrixXd::Zero(h, in);
  c.u_reset = MatrixXd::Zero(h, h);
  c.b_reset = VectorXd::Zero(h);
  c.w_candidate = MatrixXd::Zero(h, in);
  c.u_candidate = MatrixXd::Zero(h, h);
  c.b_candidate = VectorXd::Zero(h);
  return c;
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  const auto a = static_cast<Eigen::Index>(config.affect_dim);
  if (config.sentiment_mode) p.sentiment_embedding = MatrixXd::Zero(kSentimentClasses, a);
  if (config.emotion_mode) p.emotion_embedding = MatrixXd::Zero(kEmotionClasses, a);
  if (config.fallback_vocab > 0) {
    p.token_table = MatrixXd::Zero(static_cast<Eigen::Index>(config.fallback_vocab),
                                   static_cast<Eigen::Index>(config.d_context));
  }
  p.forward_cell = GruCell::zeros(config.input_dim(), config.hidden);
  if (config.bidirectional) p.backward_cell = GruCell::zeros(config.input_dim(), config.hidden);
  p.head_weight = MatrixXd::Zero(kNumClasses, static_cast<Eigen::Index>(config.pooled_dim()));
  p.head_bias = VectorXd::Zero(kNumClasses);
  return p;
}

ModelParams ModelParams::initialize(const ModelConfig& config) {
  ModelParams p = zeros(config);
  std::mt19937_64 rng(config.seed);
  auto fill_uniform = [&rng](auto& t, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  };
  auto glorot = [](const MatrixXd& w) {
    return std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  };
  p.visit([&](const std::string& name, auto& t) {
    if (name == "sentiment_embedding" || name == "emotion_embedding" || name == "token_table") {
      fill_uniform(t, 0.1);
    } else if (name.find(".b_") != std::string::npos || name == "head_bias") {
      t.setZero();
    } else {
      fill_uniform(t, glorot(t));
    }
  });
  return p;
}

void ModelParams::set_zero() {
  visit([](const std::string&, auto& t) { t.setZero(); });
}

bool ModelParams::all_finite() const {
  bool ok = true;
  visit([&ok](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

std::size_t parameter_count(const ModelConfig& config) {
  config.validate();
  const std::size_t a = config.affect_dim, h = config.hidden, in = config.input_dim();
  std::size_t n = 0;
  if (config.sentiment_mode) n += kSentimentClasses * a;
  if (config.emotion_mode) n += kEmotionClasses * a;
  n += config.fallback_vocab * config.d_context;
  const std::size_t per_direction = 3 * (h * in + h * h + h);
  n += per_direction * (config.bidirectional ? 2 : 1);
  n += kNumClasses * config.pooled_dim() + kNumClasses;
  return n;
}

std::size_t allocated_parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  params.visit([&n](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

VectorXd sigmoid(const VectorXd& v) { return v.unaryExpr([](double x) { return sigmoid(x); }); }

struct StepOut {
  VectorXd h, update, reset, candidate, recurrent;
};

StepOut step_detail(const VectorXd& x, const VectorXd& hp, const GruCell& c) {
  StepOut o;
  o.update = sigmoid(c.w_update * x + c.u_update * hp + c.b_update);
  o.reset = sigmoid(c.w_reset * x + c.u_reset * hp + c.b_reset);
  o.recurrent = c.u_candidate * hp;
  o.candidate = (c.w_candidate * x + o.reset.cwiseProduct(o.recurrent) + c.b_candidate)
                    .array()
                    .tanh()
                    .matrix();
  o.h = (1.0 - o.update.array()).matrix().cwiseProduct(o.candidate) + o.update.cwiseProduct(hp);
  return o;
}

// Scans rows of `inputs` in order (or reversed) and fills the cache in scan order.
void scan(const MatrixXd& inputs, const GruCell& cell, bool reverse, DirectionCache& cache) {
  const Eigen::Index t_len = inputs.rows();
  const Eigen::Index h = static_cast<Eigen::Index>(cell.hidden());
  cache.states = MatrixXd::Zero(t_len + 1, h);
  cache.update.resize(t_len, h);
  cache.reset.resize(t_len, h);
  cache.candidate.resize(t_len, h);
  cache.recurrent.resize(t_len, h);
  for (Eigen::Index s = 0; s < t_len; ++s) {
    const Eigen::Index t = reverse ? t_len - 1 - s : s;
    const VectorXd x = inputs.row(t).transpose();
    const VectorXd hp = cache.states.row(s).transpose();
    StepOut o = step_detail(x, hp, cell);
    cache.states.row(s + 1) = o.h.transpose();
    cache.update.row(s) = o.update.transpose();
    cache.reset.row(s) = o.reset.transpose();
    cache.candidate.row(s) = o.candidate.transpose();
    cache.recurrent.row(s) = o.recurrent.transpose();
  }
}

MatrixXd assemble_states(const DirectionCache& fwd, const DirectionCache* bwd, Eigen::Index t_len) {
  const Eigen::Index h = fwd.states.cols();
  MatrixXd z(t_len, bwd != nullptr ? 2 * h : h);
  z.leftCols(h) = fwd.states.bottomRows(t_len);
  if (bwd != nullptr) {
    for (Eigen::Index t = 0; t < t_len; ++t) z.block(t, h, 1, h) = bwd->states.row(t_len - t);
  }
  return z;
}

void check_finite(const MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values in ") + what);
}

}  // namespace

VectorXd gru_step(const VectorXd& x, const VectorXd& h_prev, const GruCell& cell) {
  if (x.size() != cell.w_update.cols() || h_prev.size() != cell.u_update.cols()) {
    throw ConfigError("gru_step: input or state size does not match the cell");
  }
  if (!x.allFinite() || !h_prev.allFinite()) throw NumericError("gru_step: non-finite input");
  return step_detail(x, h_prev, cell).h;
}

MatrixXd run_gru(const MatrixXd& inputs, const GruCell& forward_cell, const GruCell* backward_cell) {
  if (inputs.rows() == 0) throw ConfigError("run_gru: empty sequence");
  check_finite(inputs, "GRU inputs");
  DirectionCache fwd, bwd;
  scan(inputs, forward_cell, false, fwd);
  if (backward_cell != nullptr) scan(inputs, *backward_cell, true, bwd);
  return assemble_states(fwd, backward_cell != nullptr ? &bwd : nullptr, inputs.rows());
}

Pooled pool_and_assemble(const MatrixXd& states) {
  const Eigen::Index t_len = states.rows(), h = states.cols();
  if (t_len == 0) throw ConfigError("pool_and_assemble: empty sequence");
  Pooled out;
  out.u.resize(3 * h);
  out.argmax.assign(static_cast<std::size_t>(h), 0);
  out.u.segment(0, h) = states.colwise().mean().transpose();
  for (Eigen::Index j = 0; j < h; ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index t = 1; t < t_len; ++t) {
      if (states(t, j) > states(best, j)) best = t;
    }
    out.argmax[static_cast<std::size_t>(j)] = static_cast<std::size_t>(best);
    out.u(h + j) = states(best, j);
  }
  out.u.segment(2 * h, h) = states.row(t_len - 1).transpose();
  return out;
}

namespace {

MatrixXd build_inputs(const SequenceInput& input, const ModelParams& params,
                      const ModelConfig& config) {
  const std::size_t t_len = input.length();
  if (t_len == 0) throw ConfigError("empty input sequence");
  const bool fallback = config.fallback_vocab > 0;
  if (fallback && input.token_ids.size() != t_len) {
    throw ConfigError("fallback mode requires one token id per token");
  }
  if (!fallback && (static_cast<std::size_t>(input.context.rows()) != t_len ||
                    static_cast<std::size_t>(input.context.cols()) != config.d_context)) {
    throw ConfigError("contextual input must be T x d_context (" + std::to_string(t_len) + " x " +
                      std::to_string(config.d_context) + ")");
  }
  if (config.sentiment_mode && input.sentiment.size() != t_len) {
    throw ConfigError("sentiment labels length " + std::to_string(input.sentiment.size()) +
                      " does not match sequence length " + std::to_string(t_len));
  }
  if (config.emotion_mode && input.emotion.size() != t_len) {
    throw ConfigError("emotion labels length " + std::to_string(input.emotion.size()) +
                      " does not match sequence length " + std::to_string(t_len));
  }
  const auto t = static_cast<Eigen::Index>(t_len);
  const auto d = static_cast<Eigen::Index>(config.d_context);
  MatrixXd x(t, static_cast<Eigen::Index>(config.input_dim()));
  for (Eigen::Index i = 0; i < t; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (fallback) {
      const auto id = input.token_ids[k];
      if (id < 0 || static_cast<std::size_t>(id) >= config.fallback_vocab) {
        throw ConfigError("token id out of range of the fallback table");
      }
      x.row(i).head(d) = params.token_table.row(id);
    } else {
      x.row(i).head(d) = input.context.row(i);
    }
    if (config.sentiment_mode) {
      x.row(i).tail(static_cast<Eigen::Index>(config.affect_dim)) =
          params.sentiment_embedding.row(static_cast<int>(input.sentiment[k]));
    } else if (config.emotion_mode) {
      x.row(i).tail(static_cast<Eigen::Index>(config.affect_dim)) =
          params.emotion_embedding.row(static_cast<int>(input.emotion[k]));
    }
  }
  return x;
}

}  // namespace

ForwardCache classify_forward(const SequenceInput& input, const ModelParams& params,
                              const ModelConfig& config, std::mt19937_64* rng) {
  ForwardCache cache;
  cache.inputs = build_inputs(input, params, config);
  check_finite(cache.inputs, "model inputs");
  cache.token_ids = input.token_ids;
  cache.sentiment = input.sentiment;
  cache.emotion = input.emotion;

  const Eigen::Index t_len = cache.inputs.rows();
  scan(cache.inputs, params.forward_cell, false, cache.forward);
  if (config.bidirectional) scan(cache.inputs, params.backward_cell, true, cache.backward);
  cache.states =
      assemble_states(cache.forward, config.bidirectional ? &cache.backward : nullptr, t_len);

  Pooled pooled = pool_and_assemble(cache.states);
  cache.pooled = std::move(pooled.u);
  cache.argmax = std::move(pooled.argmax);

  VectorXd head_in = cache.pooled;
  if (rng != nullptr && config.dropout > 0.0) {
    std::bernoulli_distribution keep(1.0 - config.dropout);
    cache.dropout_mask.resize(head_in.size());
    for (Eigen::Index i = 0; i < head_in.size(); ++i) {
      cache.dropout_mask(i) = keep(*rng) ? 1.0 / (1.0 - config.dropout) : 0.0;
    }
    head_in = head_in.cwiseProduct(cache.dropout_mask);
  }
  cache.logits = params.head_weight * head_in + params.head_bias;
  const double m = cache.logits.maxCoeff();
  cache.probs = (cache.logits.array() - m).exp().matrix();
  cache.probs /= cache.probs.sum();
  check_finite(cache.probs, "class probabilities");
  return cache;
}

int predict(const ForwardCache& cache) {
  Eigen::Index best = 0;
  cache.probs.maxCoeff(&best);
  return static_cast<int>(best);
}

// ---------------------------------------------------------------------------
// Backward

namespace {

// Backpropagates through one direction. `d_states` is T x h in scan order;
// returns the input gradient in scan order.
MatrixXd backprop_direction(const MatrixXd& inputs, bool reverse, const DirectionCache& c,
                            const MatrixXd& d_states, const GruCell& cell, GruCell& g) {
  const Eigen::Index t_len = d_states.rows(), h = d_states.cols();
  MatrixXd d_update_pre(t_len, h), d_reset_pre(t_len, h), d_cand_pre(t_len, h);
  MatrixXd d_recurrent(t_len, h);
  VectorXd carry = VectorXd::Zero(h);
  for (Eigen::Index s = t_len - 1; s >= 0; --s) {
    const VectorXd dh = d_states.row(s).transpose() + carry;
    const VectorXd hp = c.states.row(s).transpose();
    const VectorXd z = c.update.row(s).transpose();
    const VectorXd r = c.reset.row(s).transpose();
    const VectorXd n = c.candidate.row(s).transpose();
    const VectorXd rec = c.recurrent.row(s).transpose();

    const VectorXd dn = dh.cwiseProduct((1.0 - z.array()).matrix());
    const VectorXd dz = dh.cwiseProduct(hp - n);
    VectorXd dhp = dh.cwiseProduct(z);

    const VectorXd dan = dn.cwiseProduct((1.0 - n.array().square()).matrix());
    const VectorXd dr = dan.cwiseProduct(rec);
    const VectorXd drec = dan.cwiseProduct(r);
    const VectorXd daz = dz.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));
    const VectorXd dar = dr.cwiseProduct(r.cwiseProduct((1.0 - r.array()).matrix()));

    dhp += cell.u_candidate.transpose() * drec;
    dhp += cell.u_update.transpose() * daz;
    dhp += cell.u_reset.transpose() * dar;

    d_update_pre.row(s) = daz.transpose();
    d_reset_pre.row(s) = dar.transpose();
    d_cand_pre.row(s) = dan.transpose();
    d_recurrent.row(s) = drec.transpose();
    carry = dhp;
  }

  MatrixXd x_scan(t_len, inputs.cols());
  for (Eigen::Index s = 0; s < t_len; ++s) x_scan.row(s) = inputs.row(reverse ? t_len - 1 - s : s);
  const auto h_prev = c.states.topRows(t_len);

  g.w_update += d_update_pre.transpose() * x_scan;
  g.w_reset += d_reset_pre.transpose() * x_scan;
  g.w_candidate += d_cand_pre.transpose() * x_scan;
  g.u_update += d_update_pre.transpose() * h_prev;
  g.u_reset += d_reset_pre.transpose() * h_prev;
  g.u_candidate += d_recurrent.transpose() * h_prev;
  g.b_update += d_update_pre.colwise().sum().transpose();
  g.b_reset += d_reset_pre.colwise().sum().transpose();
  g.b_candidate += d_cand_pre.colwise().sum().transpose();

  return d_update_pre * cell.w_update + d_reset_pre * cell.w_reset + d_cand_pre * cell.w_candidate;
}

}  // namespace

void backward_accumulate(const ForwardCache& cache, const VectorXd& d_logits,
                         const VectorXd* d_pooled_extra, const ModelParams& params,
                         const ModelConfig& config, ModelParams& grads) {
  const Eigen::Index t_len = cache.states.rows();
  const Eigen::Index big_h = cache.states.cols();
  const Eigen::Index h = static_cast<Eigen::Index>(config.hidden);

  VectorXd head_in = cache.pooled;
  if (cache.dropout_mask.size() > 0) head_in = head_in.cwiseProduct(cache.dropout_mask);
  grads.head_weight += d_logits * head_in.transpose();
  grads.head_bias += d_logits;
  VectorXd du = params.head_weight.transpose() * d_logits;
  if (cache.dropout_mask.size() > 0) du = du.cwiseProduct(cache.dropout_mask);
  if (d_pooled_extra != nullptr) du += *d_pooled_extra;

  // Pooling: avg spreads 1/T, max routes to the recorded winner, last goes to row T-1.
  MatrixXd d_states = MatrixXd::Zero(t_len, big_h);
  const VectorXd d_avg = du.segment(0, big_h) / static_cast<double>(t_len);
  d_states.rowwise() += d_avg.transpose();
  for (Eigen::Index j = 0; j < big_h; ++j) {
    d_states(static_cast<Eigen::Index>(cache.argmax[static_cast<std::size_t>(j)]), j) +=
        du(big_h + j);
  }
  d_states.row(t_len - 1) += du.segment(2 * big_h, big_h).transpose();

  MatrixXd d_inputs = backprop_direction(cache.inputs, false, cache.forward, d_states.leftCols(h),
                                         params.forward_cell, grads.forward_cell);
  if (config.bidirectional) {
    MatrixXd d_bwd_scan(t_len, h);
    for (Eigen::Index s = 0; s < t_len; ++s) d_bwd_scan.row(s) = d_states.block(t_len - 1 - s, h, 1, h);
    const MatrixXd d_in_scan = backprop_direction(cache.inputs, true, cache.backward, d_bwd_scan,
                                                  params.backward_cell, grads.backward_cell);
    for (Eigen::Index s = 0; s < t_len; ++s) d_inputs.row(t_len - 1 - s) += d_in_scan.row(s);
  }

  const auto d = static_cast<Eigen::Index>(config.d_context);
  const auto a = static_cast<Eigen::Index>(config.affect_dim);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const auto k = static_cast<std::size_t>(t);
    if (config.fallback_vocab > 0) grads.token_table.row(cache.token_ids[k]) += d_inputs.row(t).head(d);
    if (config.sentiment_mode) {
      grads.sentiment_embedding.row(static_cast<int>(cache.sentiment[k])) += d_inputs.row(t).tail(a);
    } else if (config.emotion_mode) {
      grads.emotion_embedding.row(static_cast<int>(cache.emotion[k])) += d_inputs.row(t).tail(a);
    }
  }
}

ModelParams backward(const ForwardCache& cache, int gold, const ModelParams& params,
                     const ModelConfig& config) {
  ModelParams grads = ModelParams::zeros(config);
  VectorXd d_logits = cache.probs;
  d_logits(gold) -= 1.0;
  backward_accumulate(cache, d_logits, nullptr, params, config, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// Consistency penalty

namespace {

struct Cosine {
  double value = 0.0;
  double norm_q = 0.0;
  double norm_p = 0.0;
  bool defined = false;
};

Cosine cosine(const VectorXd& q, const VectorXd& p) {
  Cosine c;
  c.norm_q = q.norm();
  c.norm_p = p.norm();
  if (c.norm_q == 0.0 || c.norm_p == 0.0) return c;
  c.defined = true;
  c.value = q.dot(p) / (c.norm_q * c.norm_p);
  return c;
}

}  // namespace

double consistency_penalty(const VectorXd& u_question, const VectorXd& u_pair, Stance label) {
  if (u_question.size() != u_pair.size()) throw ConfigError("consistency_penalty: size mismatch");
  const Cosine c = cosine(u_question, u_pair);
  if (!c.defined) {
    warn("consistency penalty on a zero-norm vector; using 0");
    return 0.0;
  }
  return label == Stance::kPro ? 1.0 - c.value : std::max(0.0, c.value);
}

std::pair<VectorXd, VectorXd> consistency_penalty_gradient(const VectorXd& u_question,
                                                           const VectorXd& u_pair, Stance label) {
  VectorXd gq = VectorXd::Zero(u_question.size());
  VectorXd gp = VectorXd::Zero(u_pair.size());
  const Cosine c = cosine(u_question, u_pair);
  if (!c.defined) return {gq, gp};
  double sign = 0.0;
  if (label == Stance::kPro) {
    sign = -1.0;
  } else if (c.value > 0.0) {
    sign = 1.0;
  }
  if (sign == 0.0) return {gq, gp};
  const double inv = 1.0 / (c.norm_q * c.norm_p);
  gq = sign * (u_pair * inv - c.value * u_question / (c.norm_q * c.norm_q));
  gp = sign * (u_question * inv - c.value * u_pair / (c.norm_p * c.norm_p));
  return {gq, gp};
}

// ---------------------------------------------------------------------------
// Example loss

ExampleResult example_loss(const Example& example, const ModelParams& params,
                           const ModelConfig& config, double consistency_weight,
                           ModelParams* grads, double grad_scale, std::mt19937_64* rng) {
  ExampleResult res;
  const ForwardCache cache = classify_forward(example.input, params, config, rng);
  const int gold = static_cast<int>(example.gold);
  res.prediction = predict(cache);
  res.cross_entropy = -std::log(std::max(cache.probs(gold), 1e-12));
  res.loss = res.cross_entropy;

  std::optional<ForwardCache> q_cache;
  VectorXd d_pair_extra;
  VectorXd d_question_extra;
  if (consistency_weight > 0.0) {
    if (!example.question_only) {
      throw ConfigError("consistency penalty requires a question-only sequence for '" +
                        example.id + "'");
    }
    q_cache = classify_forward(*example.question_only, params, config, nullptr);
    res.penalty = consistency_penalty(q_cache->pooled, cache.pooled, example.gold);
    res.loss += consistency_weight * res.penalty;
    if (grads != nullptr) {
      auto [gq, gp] = consistency_penalty_gradient(q_cache->pooled, cache.pooled, example.gold);
      d_question_extra = gq * (consistency_weight * grad_scale);
      d_pair_extra = gp * (consistency_weight * grad_scale);
    }
  }

  if (grads != nullptr) {
    if (cache.probs(gold) < 1e-12) warn("probability of gold class clamped at 1e-12 for '" + example.id + "'");
    VectorXd d_logits = cache.probs;
    d_logits(gold) -= 1.0;
    d_logits *= grad_scale;
    backward_accumulate(cache, d_logits, q_cache ? &d_pair_extra : nullptr, params, config, *grads);
    if (q_cache) {
      const VectorXd zero = VectorXd::Zero(kNumClasses);
      backward_accumulate(*q_cache, zero, &d_question_extra, params, config, *grads);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Gradient check

GradientCheckResult gradient_check(const ModelParams& params, const ModelConfig& config,
                                   const Example& example, const GradientCheckOptions& options,
                                   const AnalyticGradientFn& analytic) {
  ModelParams grads;
  if (analytic) {
    grads = analytic(example, params);
  } else {
    grads = ModelParams::zeros(config);
    example_loss(example, params, config, options.consistency_weight, &grads);
  }

  ModelParams probe = params;
  struct TensorRef {
    std::string name;
    double* value;
    const double* grad;
    std::size_t size;
  };
  std::vector<TensorRef> tensors;
  probe.visit([&tensors](const std::string& name, auto& t) {
    tensors.push_back({name, t.data(), nullptr, static_cast<std::size_t>(t.size())});
  });
  std::size_t k = 0;
  grads.visit([&](const std::string& name, const auto& t) {
    if (k >= tensors.size() || tensors[k].name != name ||
        tensors[k].size != static_cast<std::size_t>(t.size())) {
      throw ConfigError("gradient_check: gradient tensors do not match parameters");
    }
    tensors[k++].grad = t.data();
  });
  if (k != tensors.size()) throw ConfigError("gradient_check: gradient tensors missing");

  std::size_t total = 0;
  for (const auto& t : tensors) total += t.size;
  std::mt19937_64 rng(options.sample_seed);

  auto loss_at = [&] {
    return example_loss(example, probe, config, options.consistency_weight).loss;
  };

  GradientCheckResult result;
  for (const auto& t : tensors) {
    std::vector<std::size_t> coords(t.size);
    std::iota(coords.begin(), coords.end(), 0);
    if (total > 4 * options.min_coordinates) {
      // Proportional share with at least a handful per tensor.
      const double share = static_cast<double>(options.min_coordinates) *
                           static_cast<double>(t.size) / static_cast<double>(total);
      const std::size_t want = std::min(t.size, std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil(share))));
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(want);
      std::sort(coords.begin(), coords.end());
    }
    for (const std::size_t i : coords) {
      const double saved = t.value[i];
      t.value[i] = saved + options.eps;
      const double plus = loss_at();
      t.value[i] = saved - options.eps;
      const double minus = loss_at();
      t.value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double exact = t.grad[i];
      const double scale = std::max(std::abs(numeric), std::abs(exact));
      if (scale < options.absolute_floor) {
        ++result.skipped;
        continue;
      }
      ++result.checked;
      const double rel = std::abs(numeric - exact) / scale;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_tensor = t.name;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams& params, const json& metadata) {
  json header = metadata.is_object() ? metadata : json::object();
  header["model"] = to_json(config);
  json shapes = json::array();
  params.visit([&shapes](const std::string& name, const auto& t) {
    shapes.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  });
  header["tensors"] = shapes;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  binio::put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  params.visit([&out](const std::string&, const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) binio::put<double>(out, t.data()[i]);
  });
  out.flush();
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  binio::Reader rd(in, path.string());
  const auto len = rd.get<std::uint64_t>("header length");
  if (len > (1ull << 32)) throw DataError(path.string() + ": implausible checkpoint header length");
  std::string text(len, '\0');
  rd.read_bytes(text.data(), len, "header");
  Checkpoint ck;
  try {
    ck.metadata = json::parse(text);
    ck.config = model_config_from_json(ck.metadata.at("model"));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint header (" + e.what() + ")");
  }
  ck.params = ModelParams::zeros(ck.config);
  const json& shapes = ck.metadata.at("tensors");
  std::size_t k = 0;
  ck.params.visit([&](const std::string& name, auto& t) {
    if (k >= shapes.size() || shapes[k].at("name") != name ||
        shapes[k].at("rows").template get<Eigen::Index>() != t.rows() ||
        shapes[k].at("cols").template get<Eigen::Index>() != t.cols()) {
      throw DataError(path.string() + ": tensor '" + name + "' does not match the model config");
    }
    ++k;
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rd.get<double>("tensor data");
  });
  if (k != shapes.size()) throw DataError(path.string() + ": extra tensors in checkpoint");
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError(path.string() + ": trailing bytes at offset " + std::to_string(rd.offset()));
  }
  ck.metadata.erase("model");
  ck.metadata.erase("tensors");
  return ck;
}

}  // namespace stancelab
