// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <filesystem>
#include <fstream>

#include "mapgate/kinematics.hpp"
#include "mapgate/scene_io.hpp"
#include "mapgate/scenegen.hpp"

using namespace mapgate;
namespace fs = std::filesystem;

namespace {

scenegen::ScenarioSpec base_spec(scenegen::ScenarioKind kind, double speed,
                                 double kp, double kf, std::uint64_t seed = 3) {
  scenegen::ScenarioSpec spec;
  spec.kind = kind;
  spec.speed = speed;
  spec.curvature_past = kp;
  spec.curvature_future = kf;
  spec.seed = seed;
  return spec;
}

fs::path temp_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("straight zero-noise scene is exact") {
  auto spec = base_spec(scenegen::ScenarioKind::straight, 5.0, 0.0, 0.0);
  spec.noise_along = 0.0;
  spec.noise_cross = 0.0;
  const Scene scene = scenegen::generate_scene(spec);

  CHECK(scene.history.points.rows() == 5);
  CHECK(scene.future_gt.points.rows() == 6);
  CHECK(scene.history.span() == doctest::Approx(2.0));
  CHECK(scene.delta_theta_gt == doctest::Approx(0.0).epsilon(1e-9));

  for (const auto& e : scene.elements) {
    for (size_t i = 0; i < e.observed.size(); ++i) {
      CHECK((e.observed[i].noisy_xy.transpose() - e.true_pts.row(i)).norm() ==
            0.0);
    }
  }
  // Straight in +x from the origin at t = -2 s: the ego sits at x = 10 at the
  // prediction time and x = 25 at the end of the horizon.
  CHECK(scene.history.points(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(scene.history.points(4, 0) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(scene.future_gt.points(5, 0) == doctest::Approx(25.0).epsilon(1e-9));
  CHECK(std::abs(scene.future_gt.points(5, 1)) < 1e-9);
}

TEST_CASE("steady turn keeps delta theta at zero") {
  // 0.05 1/m at 5 m/s: 0.25 rad/s in both windows.
  const auto spec = base_spec(scenegen::ScenarioKind::steady_turn, 5.0, 0.05, 0.05);
  const Scene scene = scenegen::generate_scene(spec);
  CHECK(std::abs(scene.delta_theta_gt) < 1e-9);

  const double psi_dot = kin::average_angular_velocity(scene.history);
  CHECK(psi_dot == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("straight to turn hits the closed-form indicator") {
  const auto spec =
      base_spec(scenegen::ScenarioKind::straight_to_turn, 5.0, 0.0, 0.1);
  const Scene scene = scenegen::generate_scene(spec);
  CHECK(std::abs(scene.delta_theta_gt - 1.0) < 1e-9);

  const auto s = kin::compute_delta_theta(scene.history,
                                          kinematic_future_window(scene));
  CHECK(std::abs(s.delta_theta - scene.delta_theta_gt) < 1e-12);
  CHECK(s.psi_dot_future == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("lane change has no net yaw-rate change") {
  auto spec = base_spec(scenegen::ScenarioKind::lane_change, 6.0, 0.0, 0.1);
  const Scene scene = scenegen::generate_scene(spec);
  CHECK(std::abs(scene.delta_theta_gt) < 1e-9);
  // The path actually bends.
  CHECK(scene.future_gt.points.col(1).cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("curvature blending keeps the heading rate continuous") {
  const auto spec =
      base_spec(scenegen::ScenarioKind::straight_to_turn, 5.0, -0.1, 0.15);
  const Scene scene = scenegen::generate_scene(spec);
  // Sampled headings along the dense centerline should show no jump larger
  // than the per-step bound v * kappa_max * h (plus slack).
  const auto& center = scene.elements[2].true_pts;
  std::vector<double> headings;
  for (long i = 0; i + 1 < center.rows(); ++i) {
    const Eigen::Vector2d d = center.row(i + 1) - center.row(i);
    headings.push_back(std::atan2(d.y(), d.x()));
  }
  for (size_t i = 0; i + 1 < headings.size(); ++i) {
    double jump = std::abs(kin::wrap_angle(headings[i + 1] - headings[i]));
    CHECK(jump < 0.45);  // spacing 2 m, |kappa| <= 0.15 -> <= 0.3 rad + slack
  }
}

TEST_CASE("observation noise matches its recorded covariance") {
  auto spec = base_spec(scenegen::ScenarioKind::steady_turn, 5.0, 0.08, 0.08);
  spec.noise_along = 0.5;
  spec.noise_cross = 0.05;

  // Regenerate the same scene many times and accumulate the empirical
  // covariance of one vertex offset.
  const Scene first = scenegen::generate_scene(spec);
  const int element = 0, vertex = 4;
  const Eigen::Vector2d true_pt = first.elements[element].true_pts.row(vertex);
  const Eigen::Vector3d cov_params = first.elements[element].true_cov[vertex];

  Eigen::Matrix2d expected;
  const double s1 = cov_params.x(), s2 = cov_params.y(), rho = cov_params.z();
  expected << s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2;

  const int n = 10000;
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    auto s = spec;
    s.seed = 100000 + i;
    // Occlusion profile must stay fixed across regenerations.
    s.occlusion_profile.assign(first.vertex_count(), 0.0);
    for (size_t k = 0, idx = 0; k < first.elements.size(); ++k) {
      for (const auto& o : first.elements[k].observed) {
        s.occlusion_profile[idx++] = o.occlusion;
      }
    }
    const Scene scene = scenegen::generate_scene(s);
    const Eigen::Vector2d d =
        Eigen::Vector2d(scene.elements[element].observed[vertex].noisy_xy) -
        true_pt;
    mean += d;
    acc += d * d.transpose();
  }
  mean /= n;
  const Eigen::Matrix2d empirical = acc / n - mean * mean.transpose();
  const double rel_err = (empirical - expected).norm() / expected.norm();
  CHECK(rel_err < 0.05);
}

TEST_CASE("noise major axis aligns with the local tangent") {
  auto spec = base_spec(scenegen::ScenarioKind::steady_turn, 5.0, 0.1, 0.1, 17);
  const Scene scene = scenegen::generate_scene(spec);
  for (const auto& e : scene.elements) {
    for (size_t i = 0; i < e.observed.size(); ++i) {
      Eigen::Matrix2d cov;
      const double s1 = e.true_cov[i].x(), s2 = e.true_cov[i].y(),
                   rho = e.true_cov[i].z();
      cov << s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
      const Eigen::Vector2d major = eig.eigenvectors().col(1);  // larger eigenvalue
      const Eigen::Vector2d tangent = e.observed[i].tangent;
      const double cross = std::abs(major.x() * tangent.y() - major.y() * tangent.x());
      CHECK(cross < 1e-6);
    }
  }
}

TEST_CASE("invalid specs are rejected") {
  auto ok = base_spec(scenegen::ScenarioKind::steady_turn, 5.0, 0.1, 0.1);
  CHECK_NOTHROW(scenegen::generate_scene(ok));

  auto bad = ok;
  bad.speed = 0.0;
  CHECK_THROWS_AS(scenegen::generate_scene(bad), InvalidSpec);

  bad = ok;
  bad.curvature_past = bad.curvature_future = 0.5;  // 2.5 rad/s yaw rate
  CHECK_THROWS_AS(scenegen::generate_scene(bad), InvalidSpec);

  bad = ok;
  bad.noise_along = -0.1;
  CHECK_THROWS_AS(scenegen::generate_scene(bad), InvalidSpec);

  bad = base_spec(scenegen::ScenarioKind::straight, 5.0, 0.01, 0.0);
  CHECK_THROWS_AS(scenegen::generate_scene(bad), InvalidSpec);

  bad = base_spec(scenegen::ScenarioKind::steady_turn, 5.0, 0.05, 0.07);
  CHECK_THROWS_AS(scenegen::generate_scene(bad), InvalidSpec);

  bad = ok;
  bad.occlusion_profile = {2.0};
  CHECK_THROWS_AS(scenegen::generate_scene(bad), InvalidSpec);
}

TEST_CASE("scene json round trip") {
  auto spec = base_spec(scenegen::ScenarioKind::straight_to_turn, 6.0, 0.02, -0.1, 8);
  const Scene scene = scenegen::generate_scene(spec, {}, "round_trip");
  const Scene back = io::scene_from_json(io::scene_to_json(scene));

  CHECK(back.id == scene.id);
  CHECK(back.delta_theta_gt == scene.delta_theta_gt);
  CHECK((back.history.points - scene.history.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.future_gt.points - scene.future_gt.points).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.elements.size() == scene.elements.size());
  for (size_t e = 0; e < back.elements.size(); ++e) {
    CHECK(back.elements[e].cls == scene.elements[e].cls);
    CHECK((back.elements[e].true_pts - scene.elements[e].true_pts)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    for (size_t i = 0; i < back.elements[e].observed.size(); ++i) {
      CHECK((back.elements[e].observed[i].noisy_xy -
             scene.elements[e].observed[i].noisy_xy).norm() == 0.0);
      CHECK(back.elements[e].observed[i].occlusion ==
            scene.elements[e].observed[i].occlusion);
      CHECK((back.elements[e].true_cov[i] - scene.elements[e].true_cov[i])
                .norm() == 0.0);
    }
  }
}

TEST_CASE("benchmark quotas, determinism, and bin agreement") {
  scenegen::BenchmarkConfig cfg;
  cfg.train_scenes = 50;
  cfg.val_scenes = 25;
  cfg.test_scenes = 25;
  cfg.master_seed = 99;

  const fs::path dir_a = temp_dir("mapgate_bench_a");
  const fs::path dir_b = temp_dir("mapgate_bench_b");
  const auto manifest_a = scenegen::generate_benchmark(cfg, dir_a);
  const auto manifest_b = scenegen::generate_benchmark(cfg, dir_b);

  // Largest-remainder quotas for 50 scenes at (52, 28, 12, 8)%.
  const auto counts = scenegen::bin_counts(cfg.bin_quota_percent, 50);
  CHECK(counts[0] == 26);
  CHECK(counts[1] == 14);
  CHECK(counts[2] == 6);
  CHECK(counts[3] == 4);
  for (const auto& [split, bins] : manifest_a.splits) {
    const int total = manifest_a.split_total(split);
    const auto expected = scenegen::bin_counts(cfg.bin_quota_percent, total);
    CHECK(bins == expected);
  }

  // Byte-identical regeneration.
  for (const auto& rel :
       {fs::path("manifest.json"), fs::path("scenes/train/train_000000.json"),
        fs::path("scenes/test/test_000024.json")}) {
    CHECK(slurp(dir_a / rel) == slurp(dir_b / rel));
    CHECK(!slurp(dir_a / rel).empty());
  }

  // Re-derive the indicator from stored noiseless trajectories.
  const auto dataset = io::load_dataset(dir_a);
  std::array<int, 4> train_bins{};
  for (const Scene& scene : dataset.train) {
    const auto s = kin::compute_delta_theta(scene.history,
                                            kinematic_future_window(scene));
    CHECK(std::abs(s.delta_theta - scene.delta_theta_gt) < 1e-9);
    ++train_bins[kin::bin_delta_theta(s.delta_theta)];
  }
  CHECK(train_bins == manifest_a.splits[0].second);

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("quota validation") {
  CHECK_THROWS_AS(scenegen::bin_counts({50, 30, 10, 5}, 100), InvalidSpec);
  CHECK_THROWS_AS(scenegen::bin_counts({-1, 71, 20, 10}, 100), InvalidSpec);
  const auto counts = scenegen::bin_counts({52, 28, 12, 8}, 1000);
  CHECK(counts[0] == 520);
  CHECK(counts[1] == 280);
  CHECK(counts[2] == 120);
  CHECK(counts[3] == 80);
}
