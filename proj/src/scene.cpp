// SPDX-License-Identifier: Apache-2.0
#include "mapgate/scene.hpp"

#include <cmath>

#include "mapgate/kinematics.hpp"

namespace mapgate {

Trajectory kinematic_future_window(const Scene& scene) {
  const int points = static_cast<int>(std::lround(kin::kDefaultWindow / scene.dt)) + 1;
  if (scene.future_gt.points.rows() < points) {
    throw WindowMismatch("scene future shorter than the kinematic window");
  }
  Trajectory window;
  window.dt = scene.dt;
  window.points = scene.future_gt.points.topRows(points);
  return window;
}

std::vector<const VertexObservation*> all_observations(const Scene& scene) {
  std::vector<const VertexObservation*> out;
  out.reserve(scene.vertex_count());
  for (const auto& e : scene.elements) {
    for (const auto& o : e.observed) out.push_back(&o);
  }
  return out;
}

Eigen::MatrixX2d true_vertex_positions(const Scene& scene) {
  Eigen::MatrixX2d out(scene.vertex_count(), 2);
  int row = 0;
  for (const auto& e : scene.elements) {
    for (long i = 0; i < e.true_pts.rows(); ++i) {
      out.row(row++) = e.true_pts.row(i);
    }
  }
  return out;
}

}  // namespace mapgate
