// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mapgate/kinematics.hpp"
#include "mapgate/rng.hpp"
#include "support/oracles.hpp"

using namespace mapgate;

TEST_CASE("straight line has zero angular velocity") {
  const Trajectory traj = oracle::straight_trajectory(5.0, 0.5, 5);
  CHECK(kin::average_angular_velocity(traj) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("circular arc recovers v/R") {
  // radius 10 m at 5 m/s -> 0.5 rad/s
  const Trajectory traj = oracle::circle_trajectory(10.0, 5.0, 0.5, 5);
  CHECK(std::abs(kin::average_angular_velocity(traj) - 0.5) < 1e-6);

  const Trajectory cw = oracle::circle_trajectory(10.0, 5.0, 0.5, 5, 0.3, -1.0);
  CHECK(std::abs(kin::average_angular_velocity(cw) + 0.5) < 1e-6);
}

TEST_CASE("heading unwrap across +-pi") {
  // Segment headings +3.0 rad then -3.0 rad, one second between chords: the
  // shortest signed difference is 2*pi - 6.
  Trajectory traj;
  traj.dt = 1.0;
  traj.points.resize(3, 2);
  traj.points.row(0) << 0.0, 0.0;
  traj.points.row(1) << std::cos(3.0), std::sin(3.0);
  traj.points.row(2) = traj.points.row(1) +
                       Eigen::RowVector2d(std::cos(-3.0), std::sin(-3.0));
  const double expected = 2.0 * std::numbers::pi - 6.0;
  CHECK(kin::average_angular_velocity(traj) ==
        doctest::Approx(expected).epsilon(1e-9));
  CHECK(kin::average_angular_velocity(traj) == doctest::Approx(0.2832).epsilon(1e-3));
}

TEST_CASE("degenerate trajectories") {
  Trajectory stationary;
  stationary.dt = 0.5;
  stationary.points = Eigen::MatrixX2d::Zero(5, 2);
  CHECK_THROWS_AS(kin::average_angular_velocity(stationary), DegenerateTrajectory);

  // A single stalled segment inherits its neighbor's heading.
  Trajectory stall = oracle::circle_trajectory(10.0, 5.0, 0.5, 6);
  stall.points.row(3) = stall.points.row(2);
  CHECK_NOTHROW(kin::average_angular_velocity(stall));

  Trajectory two_points;
  two_points.dt = 0.5;
  two_points.points = Eigen::MatrixX2d::Random(2, 2);
  CHECK_THROWS_AS(kin::average_angular_velocity(two_points), InvalidValue);

  Trajectory bad_dt = oracle::straight_trajectory(5.0, 0.5, 5);
  bad_dt.dt = 0.0;
  CHECK_THROWS_AS(kin::average_angular_velocity(bad_dt), InvalidValue);
}

TEST_CASE("delta theta of a continued constant-curvature arc is zero") {
  const Trajectory past = oracle::circle_trajectory(10.0, 5.0, 0.5, 5);
  const Trajectory future = oracle::circle_trajectory(10.0, 5.0, 0.5, 5, 1.0);
  const KinematicSummary s = kin::compute_delta_theta(past, future);
  CHECK(std::abs(s.delta_theta) < 1e-9);
}

TEST_CASE("delta theta from straight to arc") {
  const Trajectory past = oracle::straight_trajectory(5.0, 0.5, 5);
  const Trajectory future = oracle::circle_trajectory(10.0, 5.0, 0.5, 5);
  const KinematicSummary s = kin::compute_delta_theta(past, future);
  CHECK(s.psi_dot_past == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(s.psi_dot_future == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.theta_past == s.psi_dot_past * 2.0);
  CHECK(s.theta_future == s.psi_dot_future * 2.0);
  CHECK(s.delta_theta == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(s.delta_theta -
                 std::abs(s.psi_dot_past - s.psi_dot_future) * 2.0) < 1e-12);
}

TEST_CASE("opposite turn directions add up") {
  // 0.3 rad/s one way then 0.3 rad/s the other: |0.3 - (-0.3)| * 2 = 1.2.
  const double radius = 5.0 / 0.3;
  const Trajectory past = oracle::circle_trajectory(radius, 5.0, 0.5, 5);
  const Trajectory future = oracle::circle_trajectory(radius, 5.0, 0.5, 5, 0.7, -1.0);
  const KinematicSummary s = kin::compute_delta_theta(past, future);
  CHECK(s.delta_theta == doctest::Approx(1.2).epsilon(1e-9));
}

TEST_CASE("window mismatch") {
  const Trajectory short_traj = oracle::straight_trajectory(5.0, 0.5, 4);  // 1.5 s
  const Trajectory ok = oracle::straight_trajectory(5.0, 0.5, 5);
  CHECK_THROWS_AS(kin::compute_delta_theta(short_traj, ok), WindowMismatch);
  CHECK_THROWS_AS(kin::compute_delta_theta(ok, short_traj), WindowMismatch);
}

TEST_CASE("resampling at twice the rate leaves the angular velocity") {
  const Trajectory coarse = oracle::circle_trajectory(10.0, 5.0, 0.5, 5);
  const Trajectory fine = oracle::circle_trajectory(10.0, 5.0, 0.25, 9);
  CHECK(std::abs(kin::average_angular_velocity(coarse) -
                 kin::average_angular_velocity(fine)) < 1e-6);
}

TEST_CASE("mirroring negates angular velocities, keeps delta theta") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const double r1 = rng.uniform(5.0, 30.0);
    const double r2 = rng.uniform(5.0, 30.0);
    const double s1 = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double s2 = rng.uniform() < 0.5 ? -1.0 : 1.0;
    Trajectory past = oracle::circle_trajectory(r1, 5.0, 0.5, 5, rng.uniform(0, 1), s1);
    Trajectory future = oracle::circle_trajectory(r2, 5.0, 0.5, 5, rng.uniform(0, 1), s2);
    const KinematicSummary s = kin::compute_delta_theta(past, future);

    past.points.col(1) *= -1.0;
    future.points.col(1) *= -1.0;
    const KinematicSummary m = kin::compute_delta_theta(past, future);
    CHECK(m.psi_dot_past == doctest::Approx(-s.psi_dot_past).epsilon(1e-12));
    CHECK(m.psi_dot_future == doctest::Approx(-s.psi_dot_future).epsilon(1e-12));
    CHECK(m.delta_theta == doctest::Approx(s.delta_theta).epsilon(1e-12));
  }
}

TEST_CASE("same trajectory in both windows gives zero") {
  const Trajectory traj = oracle::circle_trajectory(12.0, 6.0, 0.5, 5);
  CHECK(kin::compute_delta_theta(traj, traj).delta_theta == 0.0);
}

TEST_CASE("binning boundaries and exhaustiveness") {
  CHECK(kin::bin_delta_theta(0.0) == 0);
  CHECK(kin::bin_delta_theta(0.999999) == 0);
  CHECK(kin::bin_delta_theta(1.0) == 1);
  CHECK(kin::bin_delta_theta(2.0) == 2);
  CHECK(kin::bin_delta_theta(3.0) == 3);
  CHECK(kin::bin_delta_theta(3.7) == 3);
  CHECK(kin::bin_delta_theta(1e9) == 3);

  CHECK_THROWS_AS(kin::bin_delta_theta(-0.1), InvalidValue);
  CHECK_THROWS_AS(kin::bin_delta_theta(std::nan("")), InvalidValue);
  CHECK_THROWS_AS(kin::bin_delta_theta(std::numeric_limits<double>::infinity()),
                  InvalidValue);

  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(0.0, 6.0);
    const int bin = kin::bin_delta_theta(v);
    CHECK(bin >= 0);
    CHECK(bin <= 3);
    CHECK(bin == std::min(3, static_cast<int>(std::floor(v))));
  }
}
