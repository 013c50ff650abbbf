// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#include "stancelab/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "stancelab/error.hpp"
#include "stancelab/log.hpp"

namespace stancelab {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (patience > epochs) throw ConfigError("patience must not exceed epochs");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (consistency_weight < 0.0) throw ConfigError("consistency weight must be non-negative");
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"patience", c.patience},
          {"seed", c.seed},
          {"consistency", c.consistency},
          {"consistency_weight", c.consistency_weight}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.consistency = j.value("consistency", c.consistency);
  c.consistency_weight = j.value("consistency_weight", c.consistency_weight);
  return c;
}

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_loss", r.train_loss},
          {"dev_precision", r.dev.precision},
          {"dev_recall", r.dev.recall},
          {"dev_f1", r.dev.f1}};
}

double cross_entropy_loss(const Eigen::VectorXd& probs, int gold) {
  double p = probs(gold);
  if (p < 1e-12) {
    warn("probability of gold class clamped at 1e-12");
    p = 1e-12;
  }
  return -std::log(p);
}

double mean_cross_entropy(std::span<const Eigen::VectorXd> probs, std::span<const int> golds) {
  if (probs.size() != golds.size() || probs.empty()) {
    throw ConfigError("mean_cross_entropy: empty or mismatched batch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) sum += cross_entropy_loss(probs[i], golds[i]);
  return sum / static_cast<double>(probs.size());
}

AdamOptimizer::AdamOptimizer(const TrainConfig& config, const ModelParams& like)
    : lr_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.adam_eps),
      first_(like),
      second_(like) {
  first_.set_zero();
  second_.set_zero();
}

void AdamOptimizer::step(ModelParams& params, const ModelParams& grads) {
  std::vector<const double*> g;
  std::vector<std::string> names;
  grads.visit([&](const std::string& name, const auto& t) {
    if (!t.allFinite()) throw NumericError("non-finite gradient in tensor '" + name + "'");
    g.push_back(t.data());
    names.push_back(name);
  });
  std::vector<double*> m, v;
  first_.visit([&m](const std::string&, auto& t) { m.push_back(t.data()); });
  second_.visit([&v](const std::string&, auto& t) { v.push_back(t.data()); });

  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  std::size_t k = 0;
  params.visit([&](const std::string& name, auto& t) {
    if (k >= names.size() || names[k] != name) {
      throw ConfigError("Adam: gradient tensors do not match parameters");
    }
    double* p = t.data();
    const double* gk = g[k];
    double* mk = m[k];
    double* vk = v[k];
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      mk[i] = beta1_ * mk[i] + (1.0 - beta1_) * gk[i];
      vk[i] = beta2_ * vk[i] + (1.0 - beta2_) * gk[i] * gk[i];
      const double m_hat = mk[i] / c1;
      const double v_hat = vk[i] / c2;
      p[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
    ++k;
  });
}

bool EarlyStopping::observe(std::size_t epoch, double f1) {
  if (f1 > best_f1_) {
    best_f1_ = f1;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

std::vector<Stance> predict_all(const ModelParams& params, const ModelConfig& config,
                                const std::vector<Example>& examples, std::size_t threads) {
  std::vector<Stance> out(examples.size());
  parallel_for(examples.size(), threads, [&](std::size_t i) {
    out[i] = static_cast<Stance>(predict(classify_forward(examples[i].input, params, config)));
  });
  return out;
}

namespace {

std::vector<Stance> golds_of(const std::vector<Example>& examples) {
  std::vector<Stance> g;
  g.reserve(examples.size());
  for (const auto& e : examples) g.push_back(e.gold);
  return g;
}

}  // namespace

TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config,
                  const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                  const TrainCallbacks& callbacks, std::optional<ModelParams> initial_params) {
  model_config.validate();
  train_config.validate();
  if (train_set.empty()) throw ConfigError("training split is empty");
  if (dev_set.empty()) throw ConfigError("dev split is empty");

  ModelParams params = initial_params ? std::move(*initial_params) : ModelParams::initialize(model_config);
  AdamOptimizer adam(train_config, params);
  EarlyStopping stopper(train_config.patience);
  TrainResult result;
  result.params = params;
  const std::vector<Stance> dev_golds = golds_of(dev_set);

  std::mt19937_64 shuffle_rng(train_config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t batch = train_config.batch_size;
  std::vector<ModelParams> slot_grads(std::min(batch, train_set.size()), ModelParams::zeros(model_config));
  std::vector<double> slot_loss(slot_grads.size());
  ModelParams batch_grads = ModelParams::zeros(model_config);

  for (std::size_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      const double scale = 1.0 / static_cast<double>(len);
      parallel_for(len, train_config.threads, [&](std::size_t k) {
        slot_grads[k].set_zero();
        const std::size_t idx = order[start + k];
        std::mt19937_64 drop_rng(train_config.seed ^ (0x9E3779B97F4A7C15ull * (epoch * 1000003ull + idx + 1)));
        slot_loss[k] = example_loss(train_set[idx], params, model_config,
                                    train_config.effective_consistency_weight(), &slot_grads[k], scale,
                                    model_config.dropout > 0.0 ? &drop_rng : nullptr)
                           .loss;
      });
      // Index-ordered reduction keeps results independent of the thread count.
      batch_grads.set_zero();
      for (std::size_t k = 0; k < len; ++k) {
        std::vector<double*> dst;
        batch_grads.visit([&dst](const std::string&, auto& t) { dst.push_back(t.data()); });
        std::size_t j = 0;
        slot_grads[k].visit([&](const std::string&, const auto& t) {
          Eigen::Map<Eigen::VectorXd>(dst[j++], t.size()) += Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
        });
        loss_sum += slot_loss[k];
      }
      adam.step(params, batch_grads);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train_set.size());
    const auto preds = predict_all(params, model_config, dev_set, train_config.threads);
    record.dev = compute_metrics(preds, dev_golds, Stance::kPro);
    result.history.epochs.push_back(record);
    if (callbacks.on_epoch) callbacks.on_epoch(record);

    if (stopper.observe(epoch, record.dev.f1)) {
      result.params = params;
      if (callbacks.on_improvement) callbacks.on_improvement(params, record);
    }
    if (stopper.should_stop()) {
      result.history.stopped_early = epoch < train_config.epochs;
      break;
    }
  }
  result.history.best_epoch = stopper.best_epoch();
  result.history.best_dev_f1 = stopper.best_f1();
  return result;
}

}  // namespace stancelab
