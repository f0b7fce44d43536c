#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "upliftlab/dgp.hpp"
#include "upliftlab/prox_optim.hpp"
#include "upliftlab/random.hpp"

using namespace upliftlab;

namespace {

Dataset small_scenario(int id, std::size_t n, std::uint64_t seed) {
  Scenario s = scenario_by_id(id);
  s.n = n;
  s.p = 10;
  return generate_dataset(s, seed);
}

bool same_params(const TwinParams& a, const TwinParams& b) {
  if (a.intercept != b.intercept) return false;
  if (!(a.output.pos.array() == b.output.pos.array()).all()) return false;
  if (!(a.output.neg.array() == b.output.neg.array()).all()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& x = a.layers[l];
    const auto& y = b.layers[l];
    if (!(x.weights.pos.array() == y.weights.pos.array()).all()) return false;
    if (!(x.weights.neg.array() == y.weights.neg.array()).all()) return false;
    if (!(x.bias.array() == y.bias.array()).all()) return false;
    if (!(x.scale.pos.array() == y.scale.pos.array()).all()) return false;
    if (!(x.scale.neg.array() == y.scale.neg.array()).all()) return false;
  }
  return true;
}

}  // namespace

TEST(ProxLasso, ShrinksTowardZero) {
  const auto r = prox_lasso_step(1.0, 0.0, 0.0, 0.1, 0.5);
  EXPECT_NEAR(r.pos, 0.95, 1e-15);
  EXPECT_EQ(r.neg, 0.0);
  EXPECT_NEAR(r.value, 0.95, 1e-15);
}

TEST(ProxLasso, ExactZero) {
  const auto r = prox_lasso_step(0.01, 0.01, 0.0, 0.1, 0.5);
  EXPECT_EQ(r.pos, 0.0);
  EXPECT_EQ(r.neg, 0.0);
  EXPECT_EQ(r.value, 0.0);
}

TEST(ProxLasso, UnpenalizedStepMovesBothComponents) {
  // u~ = 0.8 and v~ = 0.2 are both kept by the projection, so theta' = 0.6.
  const auto r = prox_lasso_step(1.0, 0.0, 2.0, 0.1, 0.0);
  EXPECT_NEAR(r.pos, 0.8, 1e-15);
  EXPECT_NEAR(r.neg, 0.2, 1e-15);
  EXPECT_NEAR(r.value, 0.6, 1e-15);
  const auto c = canonicalize(r.value);
  EXPECT_NEAR(c.pos, 0.6, 1e-15);
  EXPECT_EQ(c.neg, 0.0);
  EXPECT_EQ(c.value, r.value);
}

TEST(ProxLasso, NonnegativeAndReconstructs) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(0, 2), v = rng.uniform(0, 2), g = rng.uniform(-5, 5);
    const double eta = rng.uniform(0.001, 0.5), lambda = rng.uniform(0, 1);
    const auto r = prox_lasso_step(u, v, g, eta, lambda);
    EXPECT_GE(r.pos, 0.0);
    EXPECT_GE(r.neg, 0.0);
    EXPECT_EQ(r.value, r.pos - r.neg);
    EXPECT_LE(std::abs(r.value), r.pos + r.neg);
    const auto c = canonicalize(r.value);
    EXPECT_EQ(c.pos - c.neg, r.value);
    EXPECT_EQ(std::abs(r.value), c.pos + c.neg);
  }
}

TEST(ProxLasso, QuadraticToyReachesSoftThreshold) {
  // l(theta) = (theta - 3)^2 / 2 with lambda = 1: soft threshold gives 2.
  for (bool canonical : {true, false}) {
    double u = 0.0, v = 0.0;
    int iters = 0;
    for (; iters < 2000; ++iters) {
      auto r = prox_lasso_step(u, v, (u - v) - 3.0, 0.1, 1.0);
      if (canonical) r = canonicalize(r.value);
      u = r.pos;
      v = r.neg;
      if (std::abs(u - v - 2.0) < 1e-9) break;
    }
    EXPECT_NEAR(u - v, 2.0, 1e-6) << canonical;
    EXPECT_LT(iters, 2000);
  }
}

TEST(ProxStructured, Examples) {
  EXPECT_EQ(prox_structured_step(1.0, 0.0, 0.0, 0.1, 0.0).value, 1.0);
  const auto pruned = prox_structured_step(0.02, 0.0, 0.0, 0.1, 0.5);
  EXPECT_EQ(pruned.value, 0.0);
  EXPECT_EQ(pruned.pos, 0.0);
  EXPECT_EQ(pruned.neg, 0.0);
  const auto fixed = prox_structured_step(0.0, 0.0, 0.0, 0.1, 0.3);
  EXPECT_EQ(fixed.pos, 0.0);
  EXPECT_EQ(fixed.neg, 0.0);
  EXPECT_EQ(fixed.value, 0.0);
}

TEST(ProxStructured, CrossedProjectionSwapsComponents) {
  const auto plain = prox_structured_step(0.7, 0.1, 0.4, 0.1, 0.2);
  const auto crossed = prox_structured_step(0.7, 0.1, 0.4, 0.1, 0.2, true);
  EXPECT_EQ(crossed.pos, plain.neg);
  EXPECT_EQ(crossed.neg, plain.pos);
  EXPECT_EQ(crossed.value, -plain.value);
  // Balanced pairs are left alone by both.
  const auto a = prox_structured_step(0.3, 0.3, 0.0, 0.1, 0.0);
  const auto b = prox_structured_step(0.3, 0.3, 0.0, 0.1, 0.0, true);
  EXPECT_EQ(a.value, b.value);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.eta = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.lambda1 = -1e-3;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_EQ(parse_reg_kind("l2"), RegKind::kL2);
  EXPECT_THROW(parse_reg_kind("elastic"), std::invalid_argument);
}

TEST(ApplyUpdate, InterceptsGetPlainSgd) {
  const std::size_t widths[] = {3};
  auto params = TwinParams::hidden(2, widths, 4);
  auto grads = ParamGrads::zeros_like(params);
  grads.intercept = 0.5;
  grads.layers[0].bias.setConstant(-2.0);
  TrainConfig cfg;
  cfg.eta = 0.1;
  cfg.lambda1 = 0.5;
  cfg.lambda2 = 0.5;
  const double before = params.intercept;
  apply_update(params, grads, cfg);
  EXPECT_NEAR(params.intercept, before - 0.05, 1e-15);
  EXPECT_TRUE((params.layers[0].bias.array() == 0.2).all());
}

TEST(ApplyUpdate, L2DecayUsesGradientSide) {
  auto params = TwinParams::interaction(0.0, Vector::Ones(3));
  auto grads = ParamGrads::zeros_like(params);
  TrainConfig cfg;
  cfg.eta = 0.1;
  cfg.lambda2 = 0.5;
  cfg.reg = RegKind::kL2;
  apply_update(params, grads, cfg);
  // Decay term g = lambda2 theta = 0.5 enters both split components.
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(params.output.value(j), 1.0 - 2 * 0.1 * 0.5, 1e-15);
  cfg.reg = RegKind::kNone;
  const auto snapshot = params.output.values();
  apply_update(params, grads, cfg);
  EXPECT_TRUE((params.output.values().array() == snapshot.array()).all());
}

TEST(ApplyUpdate, StrictModeKeepsInflatedSplit) {
  auto params = TwinParams::interaction(0.0, Vector::Ones(3));
  auto grads = ParamGrads::zeros_like(params);
  grads.output.setConstant(2.0);
  TrainConfig cfg;
  cfg.eta = 0.1;
  cfg.canonicalize = false;
  apply_update(params, grads, cfg);
  EXPECT_NEAR(params.output.pos[0], 0.8, 1e-15);
  EXPECT_NEAR(params.output.neg[0], 0.2, 1e-15);
  cfg.canonicalize = true;
  apply_update(params, grads, cfg);
  EXPECT_EQ(params.output.neg[0], 0.0);
}

TEST(Train, StructuredPenaltyPrunesNodes) {
  // 5 epochs of 125 steps shrink s by up to 3.1, enough to reach zero from 1.
  const auto data = small_scenario(5, 8000, 1);
  const std::size_t widths[] = {32};
  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.lambda1 = 0.1;
  cfg.epochs = 5;
  cfg.seed = 2;
  const auto result = train(TwinParams::hidden(data.p(), widths, 3), data, cfg);
  EXPECT_LT(active_nodes(result.params), 32u);
  for (std::size_t k = 0; k < 32; ++k) {
    const auto& s = result.params.layers[0].scale;
    if (s.value(k) == 0.0) {
      EXPECT_EQ(s.pos[Eigen::Index(k)], 0.0);
      EXPECT_EQ(s.neg[Eigen::Index(k)], 0.0);
    }
  }
}

TEST(Train, PointMassBceIsMonotone) {
  Matrix x = Matrix::Constant(20, 3, 0.5);
  const Dataset data(x, std::vector<int>(20, 1), std::vector<int>(20, 1));
  TrainConfig cfg;
  cfg.eta = 0.01;
  cfg.loss = LossKind::kBceOnly;
  cfg.epochs = 30;
  cfg.batch_size = 4;
  const auto result = train(TwinParams::interaction(3), data, cfg);
  ASSERT_EQ(result.trace.epochs.size(), 30u);
  for (std::size_t e = 1; e < result.trace.epochs.size(); ++e) {
    EXPECT_LE(result.trace.epochs[e].loss, result.trace.epochs[e - 1].loss);
  }
}

TEST(Train, Deterministic) {
  const auto data = small_scenario(2, 1500, 4);
  const std::size_t widths[] = {8};
  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.lambda1 = 0.001;
  cfg.lambda2 = 0.0005;
  cfg.epochs = 3;
  cfg.seed = 9;
  const auto init = TwinParams::hidden(data.p(), widths, 5);
  const auto a = train(init, data, cfg);
  const auto b = train(init, data, cfg);
  EXPECT_TRUE(same_params(a.params, b.params));
  cfg.seed = 10;
  const auto c = train(init, data, cfg);
  EXPECT_FALSE(same_params(a.params, c.params));
}

TEST(Train, SplitComponentsStayNonnegative) {
  const auto data = small_scenario(3, 800, 6);
  const std::size_t widths[] = {6};
  for (bool canonical : {true, false}) {
    TrainConfig cfg;
    cfg.eta = 0.2;
    cfg.lambda1 = 0.01;
    cfg.lambda2 = 0.01;
    cfg.epochs = 4;
    cfg.batch_size = 16;
    cfg.canonicalize = canonical;
    std::size_t checked = 0;
    train(TwinParams::hidden(data.p(), widths, 7), data, cfg,
          [&](const EpochStats&, const TwinParams& p) {
            EXPECT_TRUE(p.nonnegative());
            ++checked;
            return true;
          });
    EXPECT_EQ(checked, 4u);
  }
}

TEST(Train, ZeroCountGrowsWithPenalty) {
  const auto data = small_scenario(2, 1500, 7);
  std::vector<std::size_t> zeros;
  for (double lambda2 : {0.0, 0.005, 0.05}) {
    TrainConfig cfg;
    cfg.eta = 0.05;
    cfg.lambda2 = lambda2;
    cfg.epochs = 5;
    cfg.seed = 3;
    zeros.push_back(zero_weight_count(train(TwinParams::interaction(data.p()), data, cfg).params));
  }
  EXPECT_LE(zeros[0], zeros[1]);
  EXPECT_LE(zeros[1], zeros[2]);
  EXPECT_GT(zeros[2], zeros[0]);
}

TEST(Train, PrunedNodeIsFixedPoint) {
  // A node with s = 0 sits on the ReLU kink, receives subgradient 0 and stays
  // pruned whether or not the penalty is active.
  const auto data = small_scenario(4, 600, 8);
  const std::size_t widths[] = {5};
  auto init = TwinParams::hidden(data.p(), widths, 9);
  init.layers[0].scale.set(1, 0.0);
  init.layers[0].scale.set(3, 0.0);
  for (double lambda1 : {0.0, 0.01}) {
    TrainConfig cfg;
    cfg.eta = 0.1;
    cfg.lambda1 = lambda1;
    cfg.epochs = 3;
    const auto result = train(init, data, cfg);
    const auto& s = result.params.layers[0].scale;
    EXPECT_EQ(s.value(1), 0.0);
    EXPECT_EQ(s.value(3), 0.0);
    EXPECT_NE(s.value(0), 0.0);
  }
  Batch batch = full_batch(data);
  const auto grads = uplift_loss_batch(init, batch, LossKind::kUplift).grads;
  EXPECT_EQ(grads.layers[0].scale[1], 0.0);
  EXPECT_EQ(grads.layers[0].scale[3], 0.0);
}

TEST(Train, DivergenceKeepsLastFiniteEpoch) {
  const auto data = small_scenario(2, 400, 9);
  TrainConfig cfg;
  cfg.eta = 1e308;
  cfg.epochs = 5;
  const auto init = TwinParams::interaction(data.p());
  const auto result = train(init, data, cfg);
  EXPECT_TRUE(result.trace.diverged);
  EXPECT_FALSE(result.trace.diagnostic.empty());
  EXPECT_LT(result.trace.epochs.size(), 5u);
  EXPECT_TRUE(std::isfinite(result.params.intercept));
  EXPECT_TRUE(result.params.output.values().allFinite());
}

TEST(Train, RejectsMismatchedData) {
  const auto data = small_scenario(2, 100, 1);
  EXPECT_THROW(train(TwinParams::interaction(data.p() + 1), data, TrainConfig{}), std::invalid_argument);
}

TEST(TrainTrace, CsvHasOneRowPerEpoch) {
  const auto data = small_scenario(2, 300, 2);
  TrainConfig cfg;
  cfg.epochs = 4;
  const auto result = train(TwinParams::interaction(data.p()), data, cfg);
  std::ostringstream out;
  result.trace.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,loss,l1,l2,active_nodes,zero_weights");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
  for (const auto& e : result.trace.epochs) EXPECT_NEAR(e.loss, e.l1 + e.l2, 1e-12);
}

TEST(Train, ObserverCanStopEarly) {
  const auto data = small_scenario(2, 300, 3);
  TrainConfig cfg;
  cfg.epochs = 10;
  const auto result = train(TwinParams::interaction(data.p()), data, cfg,
                            [](const EpochStats& s, const TwinParams&) { return s.epoch < 3; });
  EXPECT_EQ(result.trace.epochs.size(), 3u);
}
