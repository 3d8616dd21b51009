// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>

#include "mapgate/mapper.hpp"
#include "mapgate/scenegen.hpp"
#include "support/oracles.hpp"

using namespace mapgate;
namespace fs = std::filesystem;

namespace {

std::vector<Scene> make_scenes(int count, std::uint64_t seed0,
                               double noise_along = 0.5,
                               double noise_cross = 0.05) {
  std::vector<Scene> scenes;
  for (int i = 0; i < count; ++i) {
    scenegen::ScenarioSpec spec;
    Rng rng(seed0 + i);
    spec.kind = scenegen::ScenarioKind::steady_turn;
    const double psi_dot = rng.uniform(-1.0, 1.0);
    spec.speed = rng.uniform(4.0, 8.0);
    spec.curvature_past = psi_dot / spec.speed;
    spec.curvature_future = spec.curvature_past;
    spec.noise_along = noise_along;
    spec.noise_cross = noise_cross;
    spec.seed = seed0 + i;
    scenes.push_back(scenegen::generate_scene(spec, {}, "m" + std::to_string(i)));
  }
  return scenes;
}

}  // namespace

TEST_CASE("zero-initialized head starts at the observation with unit sigma") {
  mapper::Config config;
  mapper::Model model = mapper::Model::init(config);
  const Scene scene = make_scenes(1, 3)[0];
  const PolylineMap map = model.infer(scene);

  int row = 0;
  for (size_t e = 0; e < scene.elements.size(); ++e) {
    for (size_t i = 0; i < scene.elements[e].observed.size(); ++i) {
      const UncertainVertex& v = map.elements[e].vertices[i];
      CHECK((v.mu - scene.elements[e].observed[i].noisy_xy).norm() == 0.0);
      CHECK(v.cov.sigma1() == 1.0);
      CHECK(v.cov.sigma2() == 1.0);
      CHECK(v.cov.rho() == 0.0);
      ++row;
    }
  }
  CHECK(row == scene.vertex_count());
}

TEST_CASE("context features are finite and well shaped") {
  const Scene scene = make_scenes(1, 9)[0];
  const Eigen::MatrixXd ctx = mapper::context_features(scene);
  CHECK(ctx.rows() == scene.vertex_count());
  CHECK(ctx.cols() == mapper::kContextWidth);
  CHECK(ctx.allFinite());
  // one-hot columns sum to 1 per row
  for (long i = 0; i < ctx.rows(); ++i) {
    CHECK(ctx(i, 2) + ctx(i, 3) + ctx(i, 4) == 1.0);
    // unit tangent
    CHECK(std::abs(ctx.row(i).segment<2>(5).norm() - 1.0) < 1e-6);
  }
}

TEST_CASE("emitted covariances are positive definite after training") {
  const auto train = make_scenes(40, 100);
  const auto val = make_scenes(8, 900);
  mapper::Config config;
  config.epochs = 10;
  config.lr = 3e-3;  // fast test config
  mapper::Model model = mapper::Model::init(config);
  mapper::train(model, train, val, config);

  for (const Scene& s : val) {
    const PolylineMap map = model.infer(s);
    for (const auto& e : map.elements) {
      for (const auto& v : e.vertices) {
        CHECK(v.cov.matrix().determinant() > 0.0);
      }
    }
  }
}

TEST_CASE("loss kind switch keeps output shapes") {
  const Scene scene = make_scenes(1, 5)[0];
  for (auto kind : {unc::LossKind::gaussian_cov, unc::LossKind::gaussian_indep,
                    unc::LossKind::laplace_indep}) {
    mapper::Config config;
    config.loss_kind = kind;
    mapper::Model model = mapper::Model::init(config);
    const Eigen::MatrixXd params = model.vertex_params(scene);
    CHECK(params.rows() == scene.vertex_count());
    CHECK(params.cols() == unc::kParamCols);
  }
}

TEST_CASE("higher occlusion earns larger predicted sigma") {
  const auto train = make_scenes(60, 2000);
  const auto val = make_scenes(10, 2900);
  mapper::Config config;
  config.epochs = 60;
  config.lr = 3e-3;
  config.seed = 5;
  mapper::Model model = mapper::Model::init(config);
  mapper::train(model, train, val, config);

  double high = 0.0, low = 0.0;
  int n_high = 0, n_low = 0;
  for (const Scene& s : val) {
    const Eigen::MatrixXd params = model.vertex_params(s);
    int row = 0;
    for (const auto& e : s.elements) {
      for (const auto& o : e.observed) {
        const double sigma = std::exp(params(row, unc::kLogSigma1));
        if (o.occlusion > 0.6) {
          high += sigma;
          ++n_high;
        } else if (o.occlusion < 0.2) {
          low += sigma;
          ++n_low;
        }
        ++row;
      }
    }
  }
  REQUIRE(n_high > 10);
  REQUIRE(n_low > 10);
  CHECK(high / n_high > low / n_low);
}

TEST_CASE("fitted covariance aligns with the tangent direction") {
  const auto train = make_scenes(60, 4000);
  const auto val = make_scenes(10, 4900);
  mapper::Config config;
  config.epochs = 120;
  config.lr = 3e-3;
  config.seed = 11;
  mapper::Model model = mapper::Model::init(config);
  mapper::train(model, train, val, config);

  int aligned = 0, total = 0;
  for (const Scene& s : val) {
    const PolylineMap map = model.infer(s);
    for (size_t e = 0; e < s.elements.size(); ++e) {
      for (size_t i = 0; i < s.elements[e].observed.size(); ++i) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(
            map.elements[e].vertices[i].cov.matrix());
        const Eigen::Vector2d major = eig.eigenvectors().col(1);
        const Eigen::Vector2d tangent = s.elements[e].observed[i].tangent;
        const double cosang = std::abs(major.dot(tangent));
        if (std::acos(std::min(1.0, cosang)) < 15.0 * std::numbers::pi / 180.0) {
          ++aligned;
        }
        ++total;
      }
    }
  }
  CHECK(static_cast<double>(aligned) / total >= 0.8);
}

TEST_CASE("validation nll approaches the generator entropy on a fixed context") {
  // All vertices share one context (same occlusion, tangent, class), so the
  // best attainable held-out NLL is the differential entropy
  // 0.5 * log((2*pi*e)^2 |Sigma*|) of the true noise distribution.
  const double sa = 1.0, sc = 0.4;
  scenegen::ScenarioSpec proto;
  proto.kind = scenegen::ScenarioKind::straight;
  proto.speed = 5.0;
  proto.noise_along = sa;
  proto.noise_cross = sc;
  std::vector<Scene> train, val;
  for (int i = 0; i < 120; ++i) {
    auto spec = proto;
    spec.seed = 7000 + i;
    // pin occlusion to zero so the true covariance is identical everywhere
    const Scene probe = scenegen::generate_scene(spec);
    spec.occlusion_profile.assign(probe.vertex_count(), 0.0);
    (i < 90 ? train : val)
        .push_back(scenegen::generate_scene(spec, {}, "e" + std::to_string(i)));
  }

  mapper::Config config;
  config.epochs = 150;
  config.lr = 5e-3;
  config.lambda_reg = 0.0;
  mapper::Model model = mapper::Model::init(config);
  const auto result = mapper::train(model, train, val, config);

  const double det = sa * sa * sc * sc;  // straight path: tangent rotation only
  const double entropy =
      0.5 * std::log(std::pow(2.0 * std::numbers::pi * std::numbers::e, 2) * det);
  CHECK(std::abs(result.best_val - entropy) < 0.05 * std::abs(entropy));
}

TEST_CASE("covariance loss beats independent loss on correlated data") {
  const auto train = make_scenes(80, 6000);
  const auto val = make_scenes(16, 6900);
  const auto fit = [&](unc::LossKind kind) {
    mapper::Config config;
    config.loss_kind = kind;
    config.epochs = 80;
    config.lr = 3e-3;
    mapper::Model model = mapper::Model::init(config);
    mapper::train(model, train, val, config);
    return mapper::mean_nll(model, val);
  };
  CHECK(fit(unc::LossKind::gaussian_cov) < fit(unc::LossKind::gaussian_indep));
}

TEST_CASE("one-epoch smoke run serializes a loadable checkpoint") {
  const auto train = make_scenes(10, 8000);
  const auto val = make_scenes(3, 8900);
  mapper::Config config;
  config.epochs = 1;
  mapper::Model model = mapper::Model::init(config);
  const auto result = mapper::train(model, train, val, config);
  CHECK(result.train_curve.size() == 1);

  const fs::path path = fs::temp_directory_path() / "mapper_smoke.ckpt";
  model.save(path, config.seed);
  mapper::Model loaded = mapper::Model::load(path);
  const Eigen::MatrixXd a = model.vertex_params(train[0]);
  const Eigen::MatrixXd b = loaded.vertex_params(train[0]);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training loss decreases for most epoch transitions") {
  const auto train = make_scenes(40, 9000);
  const auto val = make_scenes(8, 9900);
  mapper::Config config;
  config.epochs = 40;
  config.lr = 1e-3;
  mapper::Model model = mapper::Model::init(config);
  const auto result = mapper::train(model, train, val, config);
  int drops = 0;
  for (size_t i = 1; i < result.train_curve.size(); ++i) {
    if (result.train_curve[i] <= result.train_curve[i - 1] + 1e-12) ++drops;
  }
  CHECK(drops >= static_cast<int>(0.9 * (result.train_curve.size() - 1)));
}
