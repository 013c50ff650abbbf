// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "stancelab/error.hpp"
#include "stancelab/network.hpp"
#include "support.hpp"

using namespace stancelab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Straight-line scalar reimplementation of one gate update.
std::vector<double> scalar_step(const std::vector<double>& x, const std::vector<double>& h, const GruCell& c) {
  const std::size_t n_h = h.size(), n_x = x.size();
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> out(n_h);
  for (std::size_t i = 0; i < n_h; ++i) {
    double az = c.b_update(i), ar = c.b_reset(i), an = c.b_candidate(i), un = 0.0;
    for (std::size_t j = 0; j < n_x; ++j) {
      az += c.w_update(i, j) * x[j];
      ar += c.w_reset(i, j) * x[j];
      an += c.w_candidate(i, j) * x[j];
    }
    for (std::size_t j = 0; j < n_h; ++j) {
      az += c.u_update(i, j) * h[j];
      ar += c.u_reset(i, j) * h[j];
      un += c.u_candidate(i, j) * h[j];
    }
    const double z = sig(az), r = sig(ar);
    const double n = std::tanh(an + r * un);
    out[i] = (1.0 - z) * n + z * h[i];
  }
  return out;
}

std::vector<double> col(const MatrixXd& m, Eigen::Index row) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(j)] = m(row, j);
  return v;
}

GruCell random_cell(std::mt19937_64& rng, std::size_t in, std::size_t h) {
  GruCell c = GruCell::zeros(in, h);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  GruCell::visit_impl(c, "", [&](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
  });
  return c;
}

ModelParams randomized(const ModelConfig& c, std::mt19937_64& rng, double scale = 0.7) {
  ModelParams p = ModelParams::zeros(c);
  std::uniform_real_distribution<double> u(-scale, scale);
  p.visit([&](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
  });
  return p;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.hidden = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(parameter_count(c), ConfigError);
  c.hidden = 4;
  c.emotion_mode = true;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.sentiment_mode = false;
  CHECK_NOTHROW(c.validate());
  const ModelConfig back = model_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
}

TEST_CASE("gru_step") {
  SUBCASE("zero fixed point") {
    const GruCell c = GruCell::zeros(3, 4);
    CHECK(gru_step(VectorXd::Zero(3), VectorXd::Zero(4), c).isZero(0.0));
  }
  SUBCASE("candidate equal to the previous state is a fixed point") {
    GruCell c = GruCell::zeros(2, 3);
    const VectorXd target = (VectorXd(3) << 0.3, -0.6, 0.1).finished();
    c.b_candidate = target.array().atanh().matrix();
    c.b_update.setConstant(0.4);
    const VectorXd h = gru_step((VectorXd(2) << 1.5, -2.0).finished(), target, c);
    CHECK((h - target).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("matches the scalar oracle") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      const GruCell c = random_cell(rng, 5, 5);
      VectorXd x(5), h(5);
      for (int i = 0; i < 5; ++i) {
        x(i) = u(rng);
        h(i) = u(rng);
      }
      const VectorXd got = gru_step(x, h, c);
      const auto want = scalar_step(std::vector<double>(x.data(), x.data() + 5),
                                    std::vector<double>(h.data(), h.data() + 5), c);
      for (int i = 0; i < 5; ++i) CHECK(std::abs(got(i) - want[static_cast<std::size_t>(i)]) < 1e-10);
    }
  }
  SUBCASE("non-finite input fails fast") {
    const GruCell c = GruCell::zeros(2, 2);
    VectorXd x = VectorXd::Zero(2);
    x(1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(gru_step(x, VectorXd::Zero(2), c), NumericError);
  }
}

TEST_CASE("run_gru") {
  std::mt19937_64 rng(5);
  const GruCell f = random_cell(rng, 3, 4), b = random_cell(rng, 3, 4);
  SUBCASE("T = 1") {
    const MatrixXd x = MatrixXd::Random(1, 3);
    const MatrixXd z = run_gru(x, f, &b);
    REQUIRE(z.rows() == 1);
    REQUIRE(z.cols() == 8);
    CHECK(z.row(0).head(4).transpose().isApprox(gru_step(x.row(0).transpose(), VectorXd::Zero(4), f)));
    CHECK(z.row(0).tail(4).transpose().isApprox(gru_step(x.row(0).transpose(), VectorXd::Zero(4), b)));
  }
  SUBCASE("unidirectional width") {
    CHECK(run_gru(MatrixXd::Random(5, 3), f, nullptr).cols() == 4);
  }
  SUBCASE("empty sequence") {
    CHECK_THROWS(run_gru(MatrixXd(0, 3), f, nullptr));
  }
  SUBCASE("backward block equals a forward scan over the reversed input") {
    const MatrixXd x = MatrixXd::Random(6, 3);
    const MatrixXd z = run_gru(x, f, &b);
    const MatrixXd rev = x.colwise().reverse();
    const MatrixXd fwd_on_rev = run_gru(rev, b, nullptr);
    const MatrixXd expected = fwd_on_rev.colwise().reverse();
    CHECK((z.rightCols(4) - expected).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("forward block matches the scalar recurrence") {
    const MatrixXd x = MatrixXd::Random(4, 3);
    const MatrixXd z = run_gru(x, f, nullptr);
    std::vector<double> h(4, 0.0);
    for (Eigen::Index t = 0; t < 4; ++t) {
      h = scalar_step(col(x, t), h, f);
      for (Eigen::Index j = 0; j < 4; ++j) CHECK(std::abs(z(t, j) - h[static_cast<std::size_t>(j)]) < 1e-12);
    }
  }
}

TEST_CASE("pool_and_assemble") {
  SUBCASE("worked example") {
    MatrixXd z(2, 2);
    z << 1, 4, 3, 2;
    const Pooled p = pool_and_assemble(z);
    const VectorXd want = (VectorXd(6) << 2, 3, 3, 4, 3, 2).finished();
    CHECK(p.u == want);
    CHECK(p.argmax == std::vector<std::size_t>{1, 0});
  }
  SUBCASE("single row") {
    const MatrixXd z = MatrixXd::Random(1, 3);
    const Pooled p = pool_and_assemble(z);
    for (int k = 0; k < 3; ++k) CHECK(p.u.segment(3 * k, 3) == z.row(0).transpose());
  }
  SUBCASE("ties choose the smallest index") {
    MatrixXd z(2, 1);
    z << 5, 5;
    CHECK(pool_and_assemble(z).argmax == std::vector<std::size_t>{0});
  }
}

TEST_CASE("classify_forward") {
  std::mt19937_64 rng(12);
  SUBCASE("ablation input width") {
    const ModelConfig c = testing::tiny_config(6, 3, false, false, true, 1);
    CHECK(c.input_dim() == 6);
    const ModelParams p = ModelParams::initialize(c);
    const ForwardCache cache = classify_forward(testing::random_sequence(rng, c, 4), p, c);
    CHECK(cache.inputs.cols() == 6);
    CHECK(p.sentiment_embedding.size() == 0);
    CHECK(p.emotion_embedding.size() == 0);
  }
  SUBCASE("probabilities are a distribution") {
    for (int trial = 0; trial < 200; ++trial) {
      const ModelConfig c = testing::tiny_config(1 + rng() % 6, 1 + rng() % 5, trial % 3 == 0, trial % 3 == 1,
                                                 trial % 2 == 0, static_cast<std::uint64_t>(trial));
      const ModelParams p = randomized(c, rng, 3.0);
      const ForwardCache cache = classify_forward(testing::random_sequence(rng, c, 1 + rng() % 7), p, c);
      CHECK(std::abs(cache.probs.sum() - 1.0) <= 1e-9);
      CHECK((cache.probs.array() > 0.0).all());
      for (auto a : cache.argmax) CHECK(a < cache.length());
    }
  }
  SUBCASE("tiny model matches a straight-line recomputation") {
    const ModelConfig c = testing::tiny_config(4, 3, true, false, true, 3);
    const ModelParams p = randomized(c, rng);
    const SequenceInput in = testing::random_sequence(rng, c, 2);
    const ForwardCache cache = classify_forward(in, p, c);

    std::vector<std::vector<double>> x(2);
    for (std::size_t t = 0; t < 2; ++t) {
      x[t] = col(in.context, static_cast<Eigen::Index>(t));
      const auto row = static_cast<Eigen::Index>(static_cast<int>(in.sentiment[t]));
      for (Eigen::Index j = 0; j < 4; ++j) x[t].push_back(p.sentiment_embedding(row, j));
    }
    std::vector<double> hf0 = scalar_step(x[0], {0, 0, 0}, p.forward_cell);
    std::vector<double> hf1 = scalar_step(x[1], hf0, p.forward_cell);
    std::vector<double> hb1 = scalar_step(x[1], {0, 0, 0}, p.backward_cell);
    std::vector<double> hb0 = scalar_step(x[0], hb1, p.backward_cell);
    const std::vector<std::vector<double>> zrows = {
        {hf0[0], hf0[1], hf0[2], hb0[0], hb0[1], hb0[2]},
        {hf1[0], hf1[1], hf1[2], hb1[0], hb1[1], hb1[2]}};
    std::vector<double> u;
    for (int j = 0; j < 6; ++j) u.push_back((zrows[0][j] + zrows[1][j]) / 2.0);
    for (int j = 0; j < 6; ++j) u.push_back(std::max(zrows[0][j], zrows[1][j]));
    for (int j = 0; j < 6; ++j) u.push_back(zrows[1][j]);
    for (int k = 0; k < 2; ++k) {
      double logit = p.head_bias(k);
      for (int j = 0; j < 18; ++j) logit += p.head_weight(k, j) * u[static_cast<std::size_t>(j)];
      CHECK(std::abs(cache.logits(k) - logit) < 1e-10);
    }
  }
  SUBCASE("label length mismatch") {
    const ModelConfig c = testing::tiny_config(3, 2, true, false, false, 1);
    SequenceInput in = testing::random_sequence(rng, c, 3);
    in.sentiment.pop_back();
    CHECK_THROWS_AS(classify_forward(in, ModelParams::initialize(c), c), ConfigError);
  }
  SUBCASE("max-pool dominance") {
    for (int trial = 0; trial < 100; ++trial) {
      const ModelConfig c = testing::tiny_config(3, 1 + rng() % 4, true, false, trial % 2 == 0, 1);
      const ForwardCache cache = classify_forward(testing::random_sequence(rng, c, 1 + rng() % 8),
                                                  randomized(c, rng, 2.0), c);
      const auto h = static_cast<Eigen::Index>(c.state_dim());
      for (Eigen::Index t = 0; t < cache.states.rows(); ++t) {
        CHECK((cache.pooled.segment(h, h).transpose().array() >= cache.states.row(t).array()).all());
      }
    }
  }
}

TEST_CASE("initialization is seeded") {
  const ModelConfig c = testing::tiny_config(5, 4, false, true, true, 77);
  const ModelParams a = ModelParams::initialize(c), b = ModelParams::initialize(c);
  std::vector<double> va, vb;
  a.visit([&](const std::string&, const auto& t) { va.insert(va.end(), t.data(), t.data() + t.size()); });
  b.visit([&](const std::string&, const auto& t) { vb.insert(vb.end(), t.data(), t.data() + t.size()); });
  CHECK(std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) == 0);
  ModelConfig other = c;
  other.seed = 78;
  CHECK_FALSE(ModelParams::initialize(other).forward_cell.w_update.isApprox(a.forward_cell.w_update));
  CHECK(a.forward_cell.b_update.isZero(0.0));
  CHECK(a.head_bias.isZero(0.0));
  CHECK(a.emotion_embedding.cwiseAbs().maxCoeff() <= 0.1);
}

TEST_CASE("backward routing") {
  std::mt19937_64 rng(31);
  SUBCASE("saturated correct prediction has vanishing gradients") {
    const ModelConfig c = testing::tiny_config(3, 2, true, false, true, 2);
    ModelParams p = ModelParams::initialize(c);
    p.head_weight.setZero();
    p.head_bias << 60.0, -60.0;
    const ForwardCache cache = classify_forward(testing::random_sequence(rng, c, 3), p, c);
    const ModelParams g = backward(cache, 0, p, c);
    g.visit([](const std::string& name, const auto& t) {
      CHECK_MESSAGE(t.cwiseAbs().maxCoeff() < 1e-40, name);
    });
  }
  SUBCASE("unused affect rows get exactly zero gradient") {
    const ModelConfig c = testing::tiny_config(3, 2, false, true, false, 2);
    const ModelParams p = randomized(c, rng);
    SequenceInput in = testing::random_sequence(rng, c, 4);
    in.emotion = {Emotion::kJoy, Emotion::kFear, Emotion::kJoy, Emotion::kNeutral};
    const ModelParams g = backward(classify_forward(in, p, c), 1, p, c);
    for (int row = 0; row < kEmotionClasses; ++row) {
      const bool used = row == static_cast<int>(Emotion::kJoy) || row == static_cast<int>(Emotion::kFear) ||
                        row == static_cast<int>(Emotion::kNeutral);
      const double mag = g.emotion_embedding.row(row).cwiseAbs().maxCoeff();
      if (used) CHECK(mag > 0.0);
      else CHECK(mag == 0.0);
    }
  }
  SUBCASE("fallback rows receive gradient only when used") {
    ModelConfig c = testing::tiny_config(4, 3, true, false, true, 2);
    c.fallback_vocab = 10;
    const ModelParams p = randomized(c, rng);
    SequenceInput in = testing::random_sequence(rng, c, 3);
    in.token_ids = {2, 7, 2};
    const ModelParams g = backward(classify_forward(in, p, c), 0, p, c);
    for (int row = 0; row < 10; ++row) {
      const double mag = g.token_table.row(row).cwiseAbs().maxCoeff();
      if (row == 2 || row == 7) CHECK(mag > 0.0);
      else CHECK(mag == 0.0);
    }
  }
}

TEST_CASE("gradient check") {
  std::mt19937_64 rng(8);
  SUBCASE("tiny model agrees with finite differences") {
    const ModelConfig c = testing::tiny_config(6, 4, true, false, true, 4);
    const Example ex = testing::random_example(rng, c, 3, false);
    const auto r = gradient_check(randomized(c, rng), c, ex);
    CHECK(r.checked >= 200);
    CHECK_MESSAGE(r.max_relative_error < 1e-4, r.worst_tensor);
  }
  SUBCASE("every affect mode, both directions, fallback tables") {
    for (int mode = 0; mode < 3; ++mode) {
      for (bool bi : {false, true}) {
        for (bool fallback : {false, true}) {
          ModelConfig c = testing::tiny_config(5, 3, mode == 1, mode == 2, bi, 9);
          if (fallback) c.fallback_vocab = 6;
          const Example ex = testing::random_example(rng, c, 4, false);
          const auto r = gradient_check(randomized(c, rng), c, ex);
          CHECK_MESSAGE(r.max_relative_error < 1e-4, r.worst_tensor << " mode " << mode << " bi " << bi);
        }
      }
    }
  }
  SUBCASE("consistency penalty gradients") {
    for (bool bi : {false, true}) {
      const ModelConfig c = testing::tiny_config(4, 3, true, false, bi, 5);
      for (int trial = 0; trial < 4; ++trial) {
        Example ex = testing::random_example(rng, c, 4, true);
        ex.gold = trial % 2 ? Stance::kPro : Stance::kCon;
        GradientCheckOptions o;
        o.consistency_weight = 0.7;
        const auto r = gradient_check(randomized(c, rng), c, ex, o);
        CHECK_MESSAGE(r.max_relative_error < 1e-4, r.worst_tensor);
      }
    }
  }
  SUBCASE("zero-loss configuration skips everything") {
    const ModelConfig c = testing::tiny_config(3, 2, true, false, false, 1);
    ModelParams p = ModelParams::initialize(c);
    p.head_weight.setZero();
    p.head_bias << 80.0, -80.0;
    Example ex = testing::random_example(rng, c, 3, false);
    ex.gold = Stance::kPro;
    const auto r = gradient_check(p, c, ex);
    CHECK(r.checked == 0);
    CHECK(r.skipped > 0);
  }
  SUBCASE("a corrupted backward pass is caught") {
    const ModelConfig c = testing::tiny_config(4, 3, true, false, true, 6);
    const Example ex = testing::random_example(rng, c, 3, false);
    const ModelParams p = randomized(c, rng);
    const AnalyticGradientFn flipped = [&c](const Example& e, const ModelParams& params) {
      ModelParams g = ModelParams::zeros(c);
      example_loss(e, params, c, 0.0, &g);
      g.forward_cell.w_reset *= -1.0;
      return g;
    };
    CHECK(gradient_check(p, c, ex, {}, flipped).max_relative_error > 0.5);
  }
}

TEST_CASE("parameter count") {
  const ModelConfig def;
  const std::size_t n = parameter_count(def);
  CHECK(n == allocated_parameter_count(ModelParams::zeros(def)));
  CHECK(n <= 5'500'000);

  ModelConfig plain = def;
  plain.sentiment_mode = false;
  const std::size_t directions = 2, gates = 3;
  const std::size_t affect_matrix = 3 * def.affect_dim;
  const std::size_t input_delta = directions * gates * def.hidden * def.affect_dim;
  CHECK(n - parameter_count(plain) == affect_matrix + input_delta);
  CHECK(parameter_count(plain) == allocated_parameter_count(ModelParams::zeros(plain)));

  ModelConfig emo = def;
  emo.sentiment_mode = false;
  emo.emotion_mode = true;
  emo.bidirectional = false;
  CHECK(parameter_count(emo) == allocated_parameter_count(ModelParams::zeros(emo)));
}

TEST_CASE("consistency penalty") {
  const VectorXd a = (VectorXd(3) << 1.0, 2.0, -1.0).finished();
  const VectorXd ortho = (VectorXd(3) << 2.0, -1.0, 0.0).finished();
  CHECK(consistency_penalty(a, a, Stance::kPro) == doctest::Approx(0.0));
  CHECK(consistency_penalty(a, ortho, Stance::kCon) == doctest::Approx(0.0));
  CHECK(consistency_penalty(a, a, Stance::kCon) == doctest::Approx(1.0));
  CHECK(consistency_penalty(a, -a, Stance::kCon) == 0.0);
  CHECK(consistency_penalty(a, -a, Stance::kPro) == doctest::Approx(2.0));
  {
    testing::WarningCapture w;
    CHECK(consistency_penalty(VectorXd::Zero(3), a, Stance::kPro) == 0.0);
    CHECK_FALSE(w.messages().empty());
  }
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd q(5), p(5);
    for (int i = 0; i < 5; ++i) {
      q(i) = n(rng);
      p(i) = n(rng);
    }
    const Stance label = trial % 2 ? Stance::kPro : Stance::kCon;
    const auto [gq, gp] = consistency_penalty_gradient(q, p, label);
    const double eps = 1e-6;
    for (int i = 0; i < 5; ++i) {
      VectorXd qp = q, qm = q, pp = p, pm = p;
      qp(i) += eps;
      qm(i) -= eps;
      pp(i) += eps;
      pm(i) -= eps;
      const double nq = (consistency_penalty(qp, p, label) - consistency_penalty(qm, p, label)) / (2 * eps);
      const double np = (consistency_penalty(q, pp, label) - consistency_penalty(q, pm, label)) / (2 * eps);
      CHECK(gq(i) == doctest::Approx(nq).epsilon(1e-5).scale(1.0));
      CHECK(gp(i) == doctest::Approx(np).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  std::mt19937_64 rng(3);
  ModelConfig c = testing::tiny_config(5, 3, false, true, false, 4);
  c.fallback_vocab = 7;
  const ModelParams p = randomized(c, rng);
  testing::TempDir dir;
  save_checkpoint(dir / "m.ckpt", c, p, {{"note", "x"}});
  const Checkpoint ck = load_checkpoint(dir / "m.ckpt");
  CHECK(to_json(ck.config) == to_json(c));
  CHECK(ck.metadata.at("note") == "x");
  std::vector<double> va, vb;
  p.visit([&](const std::string&, const auto& t) { va.insert(va.end(), t.data(), t.data() + t.size()); });
  ck.params.visit([&](const std::string&, const auto& t) { vb.insert(vb.end(), t.data(), t.data() + t.size()); });
  REQUIRE(va.size() == vb.size());
  CHECK(std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) == 0);

  save_checkpoint(dir / "m2.ckpt", ck.config, ck.params, {{"note", "x"}});
  CHECK(testing::read_file(dir / "m.ckpt") == testing::read_file(dir / "m2.ckpt"));

  const std::string bytes = testing::read_file(dir / "m.ckpt");
  testing::write_file(dir / "cut.ckpt", bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(load_checkpoint(dir / "cut.ckpt"), DataError);
}

TEST_CASE("dropout only in training mode") {
  std::mt19937_64 rng(2);
  ModelConfig c = testing::tiny_config(3, 4, true, false, true, 1);
  c.dropout = 0.5;
  const ModelParams p = randomized(c, rng);
  const SequenceInput in = testing::random_sequence(rng, c, 5);
  const ForwardCache eval_a = classify_forward(in, p, c);
  const ForwardCache eval_b = classify_forward(in, p, c);
  CHECK(eval_a.dropout_mask.size() == 0);
  CHECK(eval_a.logits == eval_b.logits);
  std::mt19937_64 drop(5);
  const ForwardCache train = classify_forward(in, p, c, &drop);
  CHECK(train.dropout_mask.size() == static_cast<Eigen::Index>(c.pooled_dim()));
}
