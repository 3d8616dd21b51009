// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "mapgate/errors.hpp"

namespace mapgate {

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

// Uniformly sampled 2D waypoint sequence for one agent.
struct Trajectory {
  Eigen::MatrixX2d points;  // rows are (x, y) in meters
  double dt = 0.0;          // seconds per step

  int size() const { return static_cast<int>(points.rows()); }
  double span() const { return (points.rows() - 1) * dt; }
};

// Throws InvalidValue unless the trajectory has >= 3 finite points and dt > 0.
void check_trajectory(const Trajectory& traj);

struct KinematicSummary {
  double psi_dot_past = 0.0;    // rad/s, signed
  double psi_dot_future = 0.0;  // rad/s, signed
  double theta_past = 0.0;      // rad
  double theta_future = 0.0;    // rad
  double delta_theta = 0.0;     // rad, >= 0
};

// ---------------------------------------------------------------------------
// Uncertain map vertices
// ---------------------------------------------------------------------------

// Unconstrained covariance parameterization: sigma = exp(log_sigma) keeps the
// scales positive and rho = tanh(rho_raw) keeps the correlation in (-1, 1),
// so the materialized 2x2 covariance is positive definite for any inputs.
struct CovParams {
  double log_sigma1 = 0.0;
  double log_sigma2 = 0.0;
  double rho_raw = 0.0;

  double sigma1() const { return std::exp(log_sigma1); }
  double sigma2() const { return std::exp(log_sigma2); }
  double rho() const { return std::tanh(rho_raw); }

  Eigen::Matrix2d matrix() const {
    const double s1 = sigma1();
    const double s2 = sigma2();
    const double r = rho();
    Eigen::Matrix2d sigma;
    sigma << s1 * s1, r * s1 * s2, r * s1 * s2, s2 * s2;
    return sigma;
  }

  // Recover parameters from a positive definite covariance matrix.
  static CovParams from_matrix(const Eigen::Matrix2d& sigma);
};

struct UncertainVertex {
  Eigen::Vector2d mu{0.0, 0.0};
  CovParams cov;
};

enum class ElementClass { divider = 0, boundary = 1, crossing = 2 };
const char* to_string(ElementClass cls);
ElementClass element_class_from_string(const std::string& s);

struct MapElement {
  ElementClass cls = ElementClass::divider;
  std::vector<UncertainVertex> vertices;
};

struct PolylineMap {
  std::vector<MapElement> elements;

  int vertex_count() const {
    int n = 0;
    for (const auto& e : elements) n += static_cast<int>(e.vertices.size());
    return n;
  }
};

// Throws InvalidValue / EmptyMap when the map breaks its structural rules
// (every element needs >= 2 vertices, total vertex count > 0).
void check_map(const PolylineMap& map);

// ---------------------------------------------------------------------------
// Observations and predictions
// ---------------------------------------------------------------------------

// One noisy map vertex plus the context features that drive its reliability.
struct VertexObservation {
  Eigen::Vector2d noisy_xy{0.0, 0.0};
  double dist_to_ego = 0.0;  // meters, to the ego position at prediction time
  double occlusion = 0.0;    // [0, 1]
  ElementClass cls = ElementClass::divider;
  Eigen::Vector2d tangent{1.0, 0.0};  // unit vector along the element
};

inline constexpr int kNumCandidates = 6;

enum class Stream { base, unc, gated };
const char* to_string(Stream s);

struct CandidateSet {
  std::vector<Eigen::MatrixX2d> trajectories;  // kNumCandidates entries
  Stream tag = Stream::base;
};

void check_candidates(const CandidateSet& cands);

struct GateDecision {
  double w_base = 0.5;
  double w_unc = 0.5;
  Eigen::Vector2d logits{0.0, 0.0};  // (v_base, v_unc)
};

}  // namespace mapgate
