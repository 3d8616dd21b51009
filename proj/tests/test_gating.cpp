// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mapgate/gating.hpp"
#include "support/oracles.hpp"

using namespace mapgate;

namespace {

Eigen::RowVectorXd random_embedding(Rng& rng) {
  Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(predictor::kEmbeddingWidth);
  for (int i = 0; i < 128; ++i) e(i) = rng.uniform(-1.0, 1.0);
  return e;
}

CandidateSet random_candidates(Rng& rng, Stream tag) {
  CandidateSet c;
  c.tag = tag;
  for (int k = 0; k < kNumCandidates; ++k) {
    Eigen::MatrixX2d t(6, 2);
    for (long i = 0; i < t.size(); ++i) t(i / 2, i % 2) = rng.uniform(-10, 10);
    c.trajectories.push_back(std::move(t));
  }
  return c;
}

}  // namespace

TEST_CASE("zero-initialized gate outputs (0.5, 0.5) for any input") {
  gating::Config config;
  gating::Model model = gating::Model::init(config);
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const GateDecision d =
        model.forward(random_embedding(rng), random_embedding(rng));
    CHECK(d.logits.x() == 0.0);
    CHECK(d.logits.y() == 0.0);
    CHECK(d.w_base == 0.5);
    CHECK(d.w_unc == 0.5);
  }
}

TEST_CASE("gate decisions are deterministic and normalized") {
  gating::Config config;
  config.seed = 9;
  gating::Model model = gating::Model::init(config);
  // Give the head nonzero weights so logits vary.
  Rng wrng(5);
  model.stack.layers.back().w.value =
      nn::he_uniform(model.stack.layers.back().w.value.rows(),
                     model.stack.layers.back().w.value.cols(), wrng);

  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::RowVectorXd a = random_embedding(rng);
    const Eigen::RowVectorXd b = random_embedding(rng);
    const GateDecision d1 = model.forward(a, b);
    const GateDecision d2 = model.forward(a, b);
    CHECK(d1.w_base == d2.w_base);
    CHECK(d1.logits.x() == d2.logits.x());
    CHECK(std::abs(d1.w_base + d1.w_unc - 1.0) < 1e-9);
    CHECK(d1.w_base >= 0.0);
    CHECK(d1.w_unc >= 0.0);
  }
}

TEST_CASE("temperature softmax at the gate output") {
  // Force logits (1, 0) through the zero stack by setting the final bias.
  gating::Config config;
  config.temperature = 0.6;
  gating::Model model = gating::Model::init(config);
  model.stack.layers.back().b.value << 1.0, 0.0;

  Rng rng(3);
  const GateDecision d = model.forward(random_embedding(rng), random_embedding(rng));
  CHECK(d.logits.x() == doctest::Approx(1.0));
  CHECK(d.w_base == doctest::Approx(1.0 / (1.0 + std::exp(-1.0 / 0.6))).epsilon(1e-9));
  CHECK(d.w_base == doctest::Approx(0.8411).epsilon(1e-3));

  // Monotonically non-increasing in the temperature for fixed logits.
  double prev = 1.0;
  for (double tau : {0.1, 0.3, 0.6, 1.0, 2.0, 5.0}) {
    model.temperature = tau;
    const double w = model.forward(random_embedding(rng), random_embedding(rng)).w_base;
    CHECK(w <= prev + 1e-12);
    prev = w;
  }
}

TEST_CASE("target weights from realized errors") {
  const auto tie = gating::make_target_weights(0.7, 0.7, 0.1);
  CHECK(tie.first == 0.5);
  CHECK(tie.second == 0.5);

  const auto sharp = gating::make_target_weights(0.3, 0.5, 0.1);
  CHECK(sharp.first == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-12));
  CHECK(sharp.first == doctest::Approx(0.8808).epsilon(1e-3));

  const auto one_sided = gating::make_target_weights(0.0, 1e9, 0.1);
  CHECK(one_sided.first == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(one_sided.second == doctest::Approx(0.0).epsilon(1e-12));

  // lower error always earns the larger weight
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = rng.uniform(0.0, 3.0);
    const double b = rng.uniform(0.0, 3.0);
    const auto [wa, wb] = gating::make_target_weights(a, b, 0.1);
    CHECK(std::abs(wa + wb - 1.0) < 1e-12);
    if (a < b) CHECK(wa > wb);
    if (b < a) CHECK(wb > wa);
  }

  CHECK_THROWS_AS(gating::make_target_weights(-0.1, 0.5, 0.1), InvalidValue);
  CHECK_THROWS_AS(gating::make_target_weights(0.1, 0.5, 0.0), InvalidTemperature);
}

TEST_CASE("fusion endpoints, symmetry, and the elementwise oracle") {
  Rng rng(5);
  const CandidateSet base = random_candidates(rng, Stream::base);
  const CandidateSet unc = random_candidates(rng, Stream::unc);

  GateDecision all_base{1.0, 0.0, {5.0, -5.0}};
  const CandidateSet f1 = gating::fuse_trajectories(base, unc, all_base);
  for (int k = 0; k < kNumCandidates; ++k) {
    CHECK((f1.trajectories[k] - base.trajectories[k]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(f1.tag == Stream::gated);

  // opposite candidates cancel at (0.5, 0.5)
  CandidateSet neg = base;
  for (auto& t : neg.trajectories) t = -t;
  GateDecision half{0.5, 0.5, {0.0, 0.0}};
  const CandidateSet f2 = gating::fuse_trajectories(base, neg, half);
  for (const auto& t : f2.trajectories) {
    CHECK(t.cwiseAbs().maxCoeff() == 0.0);
  }

  // random weights against the per-waypoint linear combination
  for (int trial = 0; trial < 50; ++trial) {
    const double w = rng.uniform();
    GateDecision d{w, 1.0 - w, {0.0, 0.0}};
    const CandidateSet fused = gating::fuse_trajectories(base, unc, d);
    for (int k = 0; k < kNumCandidates; ++k) {
      const Eigen::MatrixX2d expected =
          w * base.trajectories[k] + (1.0 - w) * unc.trajectories[k];
      CHECK((fused.trajectories[k] - expected).cwiseAbs().maxCoeff() < 1e-12);
      // convexity: the fused waypoint sits on the segment between the inputs
      for (long r = 0; r < expected.rows(); ++r) {
        const Eigen::RowVector2d rel = fused.trajectories[k].row(r) -
                                       unc.trajectories[k].row(r);
        const Eigen::RowVector2d seg =
            base.trajectories[k].row(r) - unc.trajectories[k].row(r);
        CHECK((rel - w * seg).norm() < 1e-12);
      }
    }
  }

  // hard selection picks the heavier stream wholesale
  GateDecision lean_unc{0.2, 0.8, {0.0, 0.0}};
  const CandidateSet sel =
      gating::fuse_trajectories(base, unc, lean_unc, gating::Fusion::select);
  for (int k = 0; k < kNumCandidates; ++k) {
    CHECK((sel.trajectories[k] - unc.trajectories[k]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("training on separable targets moves the gate") {
  // Stream base always wins by a wide margin: target w_base ~ 0.999.
  Rng rng(6);
  const int n = 96;
  Eigen::MatrixXd inputs(n, 2 * predictor::kEmbeddingWidth);
  Eigen::MatrixXd targets(n, 2);
  for (int i = 0; i < n; ++i) {
    Eigen::RowVectorXd row(2 * predictor::kEmbeddingWidth);
    row << random_embedding(rng), random_embedding(rng);
    inputs.row(i) = row;
    const auto [wb, wu] = gating::make_target_weights(0.1, 0.8, 0.1);
    targets(i, 0) = wb;
    targets(i, 1) = wu;
  }

  gating::Config config;
  config.epochs = 60;
  config.lr = 2e-3;
  config.dropout = 0.0;
  gating::Model model = gating::Model::init(config);
  gating::train(model, inputs.topRows(64), targets.topRows(64),
                inputs.bottomRows(32), targets.bottomRows(32), config);

  double mean_w_base = 0.0;
  for (int i = 64; i < n; ++i) {
    mean_w_base += model.forward(inputs.row(i).head(predictor::kEmbeddingWidth),
                                 inputs.row(i).tail(predictor::kEmbeddingWidth))
                       .w_base;
  }
  mean_w_base /= 32;
  CHECK(mean_w_base > 0.9);
}

TEST_CASE("constant half targets are already optimal for a zero gate") {
  Rng rng(7);
  const int n = 32;
  Eigen::MatrixXd inputs(n, 2 * predictor::kEmbeddingWidth);
  Eigen::MatrixXd targets = Eigen::MatrixXd::Constant(n, 2, 0.5);
  for (int i = 0; i < n; ++i) {
    Eigen::RowVectorXd row(2 * predictor::kEmbeddingWidth);
    row << random_embedding(rng), random_embedding(rng);
    inputs.row(i) = row;
  }
  gating::Config config;
  config.epochs = 5;
  config.dropout = 0.0;
  gating::Model model = gating::Model::init(config);
  const auto result = gating::train(model, inputs, targets, inputs, targets, config);
  CHECK(result.best_val < 1e-4);
}

TEST_CASE("shape guards") {
  gating::Config config;
  gating::Model model = gating::Model::init(config);
  Eigen::RowVectorXd bad = Eigen::RowVectorXd::Zero(100);
  Eigen::RowVectorXd ok = Eigen::RowVectorXd::Zero(predictor::kEmbeddingWidth);
  CHECK_THROWS_AS(model.forward(bad, ok), ShapeMismatch);

  Rng rng(8);
  CandidateSet a = random_candidates(rng, Stream::base);
  CandidateSet b = random_candidates(rng, Stream::unc);
  b.trajectories.pop_back();
  CHECK_THROWS_AS(
      gating::fuse_trajectories(a, b, GateDecision{0.5, 0.5, {0, 0}}),
      ShapeMismatch);
}
