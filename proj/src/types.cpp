// SPDX-License-Identifier: Apache-2.0
#include "mapgate/types.hpp"

namespace mapgate {

void check_trajectory(const Trajectory& traj) {
  if (traj.points.rows() < 3) {
    throw InvalidValue("trajectory needs at least 3 points, got " +
                       std::to_string(traj.points.rows()));
  }
  if (!(traj.dt > 0.0)) {
    throw InvalidValue("trajectory dt must be positive");
  }
  if (!traj.points.allFinite()) {
    throw InvalidValue("trajectory contains non-finite coordinates");
  }
}

CovParams CovParams::from_matrix(const Eigen::Matrix2d& sigma) {
  const double s1 = std::sqrt(sigma(0, 0));
  const double s2 = std::sqrt(sigma(1, 1));
  if (!(s1 > 0.0) || !(s2 > 0.0)) {
    throw InvalidValue("covariance diagonal must be positive");
  }
  const double rho = sigma(0, 1) / (s1 * s2);
  if (!(rho > -1.0 && rho < 1.0)) {
    throw InvalidValue("correlation outside (-1, 1)");
  }
  CovParams p;
  p.log_sigma1 = std::log(s1);
  p.log_sigma2 = std::log(s2);
  p.rho_raw = std::atanh(rho);
  return p;
}

const char* to_string(ElementClass cls) {
  switch (cls) {
    case ElementClass::divider: return "divider";
    case ElementClass::boundary: return "boundary";
    case ElementClass::crossing: return "crossing";
  }
  return "divider";
}

ElementClass element_class_from_string(const std::string& s) {
  if (s == "divider") return ElementClass::divider;
  if (s == "boundary") return ElementClass::boundary;
  if (s == "crossing") return ElementClass::crossing;
  throw InvalidValue("unknown element class: " + s);
}

void check_map(const PolylineMap& map) {
  if (map.vertex_count() == 0) throw EmptyMap("map has no vertices");
  for (const auto& e : map.elements) {
    if (e.vertices.size() < 2) {
      throw InvalidValue("map element needs at least 2 vertices");
    }
    for (const auto& v : e.vertices) {
      if (!v.mu.allFinite()) throw InvalidValue("vertex mean not finite");
    }
  }
}

const char* to_string(Stream s) {
  switch (s) {
    case Stream::base: return "base";
    case Stream::unc: return "unc";
    case Stream::gated: return "gated";
  }
  return "base";
}

void check_candidates(const CandidateSet& cands) {
  if (static_cast<int>(cands.trajectories.size()) != kNumCandidates) {
    throw InvalidValue("candidate set must hold exactly " +
                       std::to_string(kNumCandidates) + " trajectories");
  }
  for (const auto& t : cands.trajectories) {
    if (!t.allFinite()) throw InvalidValue("candidate has non-finite waypoint");
  }
}

}  // namespace mapgate
