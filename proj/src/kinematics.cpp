// SPDX-License-Identifier: Apache-2.0
#include "mapgate/kinematics.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

namespace mapgate::kin {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

double wrap_angle(double radians) {
  double r = std::fmod(radians + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r - kPi;
}

namespace {

// Per-segment headings with short displacements inheriting their neighbor's
// heading. Returns the unwrapped sequence.
std::vector<double> segment_headings(const Trajectory& traj, double eps) {
  const int segments = traj.size() - 1;
  std::vector<std::optional<double>> raw(segments);
  bool any_valid = false;
  for (int i = 0; i < segments; ++i) {
    const Eigen::Vector2d d = traj.points.row(i + 1) - traj.points.row(i);
    if (d.norm() >= eps) {
      raw[i] = std::atan2(d.y(), d.x());
      any_valid = true;
    }
  }
  if (!any_valid) {
    throw DegenerateTrajectory("trajectory is stationary; heading undefined");
  }
  // Forward fill, then backfill a degenerate prefix from the first valid one.
  std::optional<double> last;
  for (int i = 0; i < segments; ++i) {
    if (raw[i]) {
      last = raw[i];
    } else if (last) {
      raw[i] = last;
    }
  }
  for (int i = segments - 1; i >= 0; --i) {
    if (raw[i]) {
      last = raw[i];
    } else {
      raw[i] = last;
    }
  }

  std::vector<double> unwrapped(segments);
  unwrapped[0] = *raw[0];
  for (int i = 1; i < segments; ++i) {
    unwrapped[i] = unwrapped[i - 1] + wrap_angle(*raw[i] - unwrapped[i - 1]);
  }
  return unwrapped;
}

}  // namespace

double average_angular_velocity(const Trajectory& traj, double displacement_eps) {
  check_trajectory(traj);
  const std::vector<double> h = segment_headings(traj, displacement_eps);
  const int segments = static_cast<int>(h.size());
  // Chord headings sit at segment midpoints; first and last midpoints are
  // (segments - 1) * dt apart.
  const double elapsed = (segments - 1) * traj.dt;
  return (h.back() - h.front()) / elapsed;
}

KinematicSummary compute_delta_theta(const Trajectory& past,
                                     const Trajectory& future,
                                     double window_seconds,
                                     double displacement_eps) {
  check_trajectory(past);
  check_trajectory(future);
  constexpr double kSpanTol = 1e-9;
  if (past.span() + kSpanTol < window_seconds) {
    throw WindowMismatch("past trajectory spans " + std::to_string(past.span()) +
                         " s, needs " + std::to_string(window_seconds));
  }
  if (future.span() + kSpanTol < window_seconds) {
    throw WindowMismatch("future trajectory spans " +
                         std::to_string(future.span()) + " s, needs " +
                         std::to_string(window_seconds));
  }

  KinematicSummary out;
  out.psi_dot_past = average_angular_velocity(past, displacement_eps);
  out.psi_dot_future = average_angular_velocity(future, displacement_eps);
  out.theta_past = out.psi_dot_past * window_seconds;
  out.theta_future = out.psi_dot_future * window_seconds;
  out.delta_theta = std::abs(out.theta_past - out.theta_future);
  return out;
}

int bin_delta_theta(double delta_theta) {
  if (!std::isfinite(delta_theta) || delta_theta < 0.0) {
    throw InvalidValue("delta_theta must be finite and non-negative");
  }
  if (delta_theta < 1.0) return 0;
  if (delta_theta < 2.0) return 1;
  if (delta_theta < 3.0) return 2;
  return 3;
}

}  // namespace mapgate::kin
