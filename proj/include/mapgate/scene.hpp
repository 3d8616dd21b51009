// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "mapgate/types.hpp"

namespace mapgate {

// One polyline of a scene's map: ground-truth geometry plus the noisy
// observations and the exact noise covariance each one was drawn from
// (stored as sigma1, sigma2, rho).
struct SceneElement {
  ElementClass cls = ElementClass::divider;
  Eigen::MatrixX2d true_pts;
  std::vector<VertexObservation> observed;
  std::vector<Eigen::Vector3d> true_cov;
};

// One prediction instance.
struct Scene {
  std::string id;
  double dt = 0.5;
  Trajectory history;    // past window, ends at the prediction time
  Trajectory future_gt;  // ground-truth future over the full horizon
  double delta_theta_gt = 0.0;
  std::vector<SceneElement> elements;

  int vertex_count() const {
    int n = 0;
    for (const auto& e : elements) n += static_cast<int>(e.observed.size());
    return n;
  }
};

// The future sub-window used for the yaw-rate indicator: it starts after the
// curvature transition has settled, so constant-curvature segments measure
// exactly.
Trajectory kinematic_future_window(const Scene& scene);

// Flattened views used by the models (element order, vertex order preserved).
std::vector<const VertexObservation*> all_observations(const Scene& scene);
Eigen::MatrixX2d true_vertex_positions(const Scene& scene);

}  // namespace mapgate
