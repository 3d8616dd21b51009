// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mapgate/types.hpp"

namespace mapgate::kin {

// Default length of the past/future comparison window, seconds.
inline constexpr double kDefaultWindow = 2.0;

// Consecutive displacements shorter than this have no usable heading; the
// previous segment's heading is reused instead.
inline constexpr double kDisplacementEps = 1e-4;

inline constexpr int kNumBins = 4;

// Signed average angular velocity over the trajectory, rad/s. Headings come
// from consecutive-point displacements, unwrapped so results stay continuous
// across +-pi; the value is (last segment heading - first segment heading)
// divided by the time between those segments' midpoints.
// Throws DegenerateTrajectory when every displacement is below eps.
double average_angular_velocity(const Trajectory& traj,
                                double displacement_eps = kDisplacementEps);

// Yaw-rate change indicator between the two windows:
//   theta_i    = psi_dot_i * window_seconds
//   delta_theta = |theta_past - theta_future|
// Throws WindowMismatch when either trajectory spans less than the window.
KinematicSummary compute_delta_theta(const Trajectory& past,
                                     const Trajectory& future,
                                     double window_seconds = kDefaultWindow,
                                     double displacement_eps = kDisplacementEps);

// Interval index for delta_theta (radians): [0,1) -> 0, [1,2) -> 1,
// [2,3) -> 2, [3,inf) -> 3. Throws InvalidValue on negative or non-finite
// input.
int bin_delta_theta(double delta_theta);

// Wrap an angle into (-pi, pi].
double wrap_angle(double radians);

}  // namespace mapgate::kin
