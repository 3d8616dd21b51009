// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "mapgate/scene.hpp"

namespace mapgate::svg {

// 1-sigma ellipse of a 2x2 covariance: semi-axes are the square roots of the
// eigenvalues, rotated to the major eigenvector.
struct EllipseParams {
  double rx = 0.0;         // major semi-axis
  double ry = 0.0;         // minor semi-axis
  double angle_rad = 0.0;  // major-axis direction
};

// Closed-form symmetric 2x2 eigendecomposition.
EllipseParams ellipse_params(const Eigen::Matrix2d& sigma);

// Scene drawing: true map, predicted vertices with 1-sigma ellipses, history,
// ground-truth future, and candidate fans per stream.
std::string render_scene(const Scene& scene, const PolylineMap* predicted,
                         const std::map<std::string, CandidateSet>& candidates);

}  // namespace mapgate::svg
