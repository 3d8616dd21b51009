// SPDX-License-Identifier: Apache-2.0
#include "mapgate/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mapgate/kinematics.hpp"
#include "mapgate/rng.hpp"
#include "mapgate/scene_io.hpp"

namespace mapgate::scenegen {

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::straight: return "straight";
    case ScenarioKind::steady_turn: return "steady_turn";
    case ScenarioKind::straight_to_turn: return "straight_to_turn";
    case ScenarioKind::turn_to_straight: return "turn_to_straight";
    case ScenarioKind::lane_change: return "lane_change";
  }
  return "straight";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "straight") return ScenarioKind::straight;
  if (s == "steady_turn") return ScenarioKind::steady_turn;
  if (s == "straight_to_turn") return ScenarioKind::straight_to_turn;
  if (s == "turn_to_straight") return ScenarioKind::turn_to_straight;
  if (s == "lane_change") return ScenarioKind::lane_change;
  throw InvalidValue("unknown scenario kind: " + s);
}

namespace {

// Curvature is linear in t over each piece (k0 == k1 for arcs and lines).
struct Piece {
  double t0, t1, k0, k1;
};

double piece_kappa(const Piece& p, double t) {
  if (p.k0 == p.k1) return p.k0;
  return p.k0 + (p.k1 - p.k0) * (t - p.t0) / (p.t1 - p.t0);
}

struct Pose {
  Eigen::Vector2d pos{0.0, 0.0};
  double psi = 0.0;
};

// 8-point Gauss-Legendre abscissae and weights on [-1, 1].
constexpr double kGlX[8] = {-0.9602898564975363, -0.7966664774136267,
                            -0.5255324099163290, -0.1834346424956498,
                            0.1834346424956498,  0.5255324099163290,
                            0.7966664774136267,  0.9602898564975363};
constexpr double kGlW[8] = {0.1012285362903763, 0.2223810344533745,
                            0.3137066458778873, 0.3626837833783620,
                            0.3626837833783620, 0.3137066458778873,
                            0.2223810344533745, 0.1012285362903763};

// Advance through one piece from ta to tb at constant speed v.
Pose advance(const Pose& from, const Piece& piece, double ta, double tb, double v) {
  Pose out = from;
  const double span = tb - ta;
  if (span <= 0.0) return out;

  if (piece.k0 == piece.k1) {
    const double k = piece.k0;
    if (std::abs(k) < 1e-12) {
      out.pos += v * span * Eigen::Vector2d(std::cos(from.psi), std::sin(from.psi));
    } else {
      const double psi1 = from.psi + v * k * span;
      out.pos.x() += (std::sin(psi1) - std::sin(from.psi)) / k;
      out.pos.y() += (std::cos(from.psi) - std::cos(psi1)) / k;
      out.psi = psi1;
    }
    return out;
  }

  // Linear curvature: the heading is an exact quadratic in t; integrate the
  // position with composite Gauss-Legendre quadrature.
  const double slope = (piece.k1 - piece.k0) / (piece.t1 - piece.t0);
  const auto psi_at = [&](double t) {
    const double ka = piece_kappa(piece, ta);
    const double dt = t - ta;
    return from.psi + v * (ka * dt + 0.5 * slope * dt * dt);
  };
  const int chunks = std::max(1, static_cast<int>(std::ceil(span / 0.05)));
  double x = from.pos.x();
  double y = from.pos.y();
  for (int c = 0; c < chunks; ++c) {
    const double a = ta + span * c / chunks;
    const double b = ta + span * (c + 1) / chunks;
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (int i = 0; i < 8; ++i) {
      const double t = mid + half * kGlX[i];
      const double w = half * kGlW[i];
      x += w * v * std::cos(psi_at(t));
      y += w * v * std::sin(psi_at(t));
    }
  }
  out.pos = {x, y};
  out.psi = psi_at(tb);
  return out;
}

// Piecewise path with poses precomputed at piece boundaries.
class Path {
 public:
  Path(std::vector<Piece> pieces, double speed)
      : pieces_(std::move(pieces)), speed_(speed) {
    boundary_.resize(pieces_.size() + 1);
    boundary_[0] = Pose{};
    for (size_t i = 0; i < pieces_.size(); ++i) {
      boundary_[i + 1] = advance(boundary_[i], pieces_[i], pieces_[i].t0,
                                 pieces_[i].t1, speed_);
    }
  }

  double t_start() const { return pieces_.front().t0; }
  double t_end() const { return pieces_.back().t1; }

  Pose pose_at(double t) const {
    if (t < t_start() - 1e-9 || t > t_end() + 1e-9) {
      throw InvalidSpec("pose requested outside the path time range");
    }
    t = std::clamp(t, t_start(), t_end());
    for (size_t i = 0; i < pieces_.size(); ++i) {
      if (t <= pieces_[i].t1 + 1e-12) {
        return advance(boundary_[i], pieces_[i], pieces_[i].t0, t, speed_);
      }
    }
    return boundary_.back();
  }

 private:
  std::vector<Piece> pieces_;
  double speed_;
  std::vector<Pose> boundary_;
};

std::vector<Piece> build_profile(const ScenarioSpec& spec,
                                 const GeometryConfig& g) {
  const double t0 = -g.history_window;
  const double t1 = g.horizon + g.map_lead;
  const double kp = spec.curvature_past;
  const double kf = spec.curvature_future;

  switch (spec.kind) {
    case ScenarioKind::straight:
    case ScenarioKind::steady_turn:
      return {{t0, t1, kp, kp}};
    case ScenarioKind::straight_to_turn:
    case ScenarioKind::turn_to_straight:
      return {{t0, 0.0, kp, kp}, {0.0, g.blend, kp, kf}, {g.blend, t1, kf, kf}};
    case ScenarioKind::lane_change: {
      // Antisymmetric S profile: hold +k, reverse to -k, settle back to 0.
      const double hold = (g.horizon - 3.0 * g.blend) / 2.0;
      const double b = g.blend;
      return {{t0, 0.0, 0.0, 0.0},
              {0.0, b, 0.0, kf},
              {b, b + hold, kf, kf},
              {b + hold, 2 * b + hold, kf, -kf},
              {2 * b + hold, 2 * b + 2 * hold, -kf, -kf},
              {2 * b + 2 * hold, 3 * b + 2 * hold, -kf, 0.0},
              {3 * b + 2 * hold, t1, 0.0, 0.0}};
    }
  }
  throw InvalidSpec("unhandled scenario kind");
}

// Smooth occlusion bumps along the arc length, clamped to [0, 0.95].
// Occluders sit ahead of the ego (the section that actually informs the
// future) and cover all elements at once. Scenes with a strong upcoming
// maneuver draw heavier occlusion than calm cruising, mirroring cluttered
// junction areas versus open straights.
std::vector<double> blob_occlusion(Rng& rng, const std::vector<double>& arc_pos,
                                   int elements, int per_element,
                                   bool maneuver) {
  struct Blob {
    double amp, center, width;
  };
  const double length = arc_pos.empty() ? 0.0 : arc_pos.back();
  const double pick = rng.uniform();
  const int n_blobs = maneuver ? (pick < 0.12 ? 0 : pick < 0.56 ? 1 : 2)
                               : (pick < 0.55 ? 0 : pick < 0.85 ? 1 : 2);
  std::vector<Blob> blobs;
  for (int b = 0; b < n_blobs; ++b) {
    Blob blob;
    blob.amp = maneuver ? rng.uniform(0.75, 0.95) : rng.uniform(0.5, 0.85);
    blob.center = rng.uniform(0.45 * length, length);
    blob.width = maneuver ? rng.uniform(8.0, 16.0) : rng.uniform(6.0, 12.0);
    blobs.push_back(blob);
  }

  std::vector<double> occ(elements * per_element, 0.0);
  for (int e = 0; e < elements; ++e) {
    for (int i = 0; i < per_element; ++i) {
      double v = 0.0;
      for (const auto& blob : blobs) {
        const double d = arc_pos[i] - blob.center;
        v += blob.amp * std::exp(-d * d / (2.0 * blob.width * blob.width));
      }
      occ[e * per_element + i] = std::clamp(v, 0.0, 0.95);
    }
  }
  return occ;
}

}  // namespace

void check_spec(const ScenarioSpec& spec, const GeometryConfig& g) {
  if (!(spec.speed > 0.0)) throw InvalidSpec("speed must be positive");
  if (spec.noise_along < 0.0 || spec.noise_cross < 0.0) {
    throw InvalidSpec("noise scales must be non-negative");
  }
  if (spec.occlusion_gain < 0.0) throw InvalidSpec("occlusion gain must be >= 0");
  constexpr double kYawTol = 1e-9;
  if (std::abs(spec.curvature_past) * spec.speed > 1.0 + kYawTol ||
      std::abs(spec.curvature_future) * spec.speed > 1.0 + kYawTol) {
    throw InvalidSpec("curvature * speed exceeds the 1 rad/s yaw bound");
  }
  if (!(g.dt > 0.0) || !(g.history_window > 0.0) || !(g.horizon > 0.0)) {
    throw InvalidSpec("geometry windows must be positive");
  }
  if (g.blend <= 0.0 || g.blend > g.dt + 1e-12) {
    throw InvalidSpec("curvature blend must lie in (0, dt]");
  }
  for (double o : spec.occlusion_profile) {
    if (!(o >= 0.0 && o <= 1.0)) throw InvalidSpec("occlusion must be in [0, 1]");
  }
  switch (spec.kind) {
    case ScenarioKind::straight:
      if (std::abs(spec.curvature_past) > 1e-12 ||
          std::abs(spec.curvature_future) > 1e-12) {
        throw InvalidSpec("straight scenes need zero curvature");
      }
      break;
    case ScenarioKind::steady_turn:
      if (spec.curvature_past != spec.curvature_future) {
        throw InvalidSpec("steady turns need equal past/future curvature");
      }
      break;
    case ScenarioKind::lane_change:
      if (std::abs(spec.curvature_past) > 1e-12) {
        throw InvalidSpec("lane changes start from a straight past");
      }
      if ((g.horizon - 3.0 * g.blend) / 2.0 < g.dt) {
        throw InvalidSpec("horizon too short for the lane-change profile");
      }
      break;
    default:
      break;
  }
}

Scene generate_scene(const ScenarioSpec& spec, const GeometryConfig& g,
                     const std::string& id) {
  check_spec(spec, g);
  Rng rng(spec.seed);
  const Path path(build_profile(spec, g), spec.speed);

  Scene scene;
  scene.id = id;
  scene.dt = g.dt;

  const int hist_steps = static_cast<int>(std::lround(g.history_window / g.dt));
  const int fut_steps = static_cast<int>(std::lround(g.horizon / g.dt));

  scene.history.dt = g.dt;
  scene.history.points.resize(hist_steps + 1, 2);
  for (int k = 0; k <= hist_steps; ++k) {
    scene.history.points.row(k) = path.pose_at((k - hist_steps) * g.dt).pos;
  }
  scene.future_gt.dt = g.dt;
  scene.future_gt.points.resize(fut_steps, 2);
  for (int k = 1; k <= fut_steps; ++k) {
    scene.future_gt.points.row(k - 1) = path.pose_at(k * g.dt).pos;
  }

  // Map: centerline along the ego path plus offset lane boundaries, sampled
  // at fixed arc-length spacing over the whole covered time range.
  const double t_map_end = g.horizon + g.map_lead;
  const double length = spec.speed * (g.history_window + t_map_end);
  const int per_element =
      std::max(2, static_cast<int>(std::floor(length / g.vertex_spacing)) + 1);
  std::vector<double> arc_pos(per_element);
  std::vector<Pose> poses(per_element);
  for (int i = 0; i < per_element; ++i) {
    arc_pos[i] = std::min(length, i * g.vertex_spacing);
    poses[i] = path.pose_at(-g.history_window + arc_pos[i] / spec.speed);
  }

  constexpr int kElements = 3;
  // Yaw-rate change implied by the curvature profile; lane changes cancel.
  const double maneuver_scale =
      spec.kind == ScenarioKind::lane_change
          ? 0.0
          : std::abs(spec.curvature_past - spec.curvature_future) * spec.speed *
                g.history_window;
  std::vector<double> occlusion = spec.occlusion_profile;
  if (occlusion.empty()) {
    occlusion = blob_occlusion(rng, arc_pos, kElements, per_element,
                               maneuver_scale >= 1.0);
  } else if (static_cast<int>(occlusion.size()) != kElements * per_element) {
    throw InvalidSpec("occlusion profile must hold one value per map vertex (" +
                      std::to_string(kElements * per_element) + ")");
  }

  const Eigen::Vector2d ego_now = path.pose_at(0.0).pos;
  const std::array<double, kElements> lateral{g.lane_half_width,
                                              -g.lane_half_width, 0.0};
  const std::array<ElementClass, kElements> classes{
      ElementClass::boundary, ElementClass::boundary, ElementClass::divider};

  for (int e = 0; e < kElements; ++e) {
    SceneElement elem;
    elem.cls = classes[e];
    elem.true_pts.resize(per_element, 2);
    for (int i = 0; i < per_element; ++i) {
      const Pose& pose = poses[i];
      const Eigen::Vector2d normal(-std::sin(pose.psi), std::cos(pose.psi));
      const Eigen::Vector2d tangent(std::cos(pose.psi), std::sin(pose.psi));
      const Eigen::Vector2d true_pt = pose.pos + lateral[e] * normal;
      elem.true_pts.row(i) = true_pt;

      const double occ = occlusion[e * per_element + i];
      const double factor = 1.0 + spec.occlusion_gain * occ;
      const double sa = spec.noise_along * factor;
      const double sc = spec.noise_cross * factor;

      Eigen::Matrix2d rot;
      rot << tangent.x(), -tangent.y(), tangent.y(), tangent.x();
      const Eigen::Vector2d z(rng.normal(), rng.normal());
      const Eigen::Vector2d noise = rot * Eigen::Vector2d(sa * z.x(), sc * z.y());

      VertexObservation obs;
      obs.noisy_xy = true_pt + noise;
      obs.dist_to_ego = (true_pt - ego_now).norm();
      obs.occlusion = occ;
      obs.cls = elem.cls;
      obs.tangent = tangent;
      elem.observed.push_back(obs);

      Eigen::Matrix2d d2 = Eigen::Matrix2d::Zero();
      d2(0, 0) = sa * sa;
      d2(1, 1) = sc * sc;
      const Eigen::Matrix2d cov = rot * d2 * rot.transpose();
      const double s1 = std::sqrt(cov(0, 0));
      const double s2 = std::sqrt(cov(1, 1));
      const double rho = s1 > 0.0 && s2 > 0.0 ? cov(0, 1) / (s1 * s2) : 0.0;
      elem.true_cov.emplace_back(s1, s2, rho);
    }
    scene.elements.push_back(std::move(elem));
  }

  scene.delta_theta_gt =
      kin::compute_delta_theta(scene.history, kinematic_future_window(scene))
          .delta_theta;
  return scene;
}

std::array<int, 4> bin_counts(const std::array<double, 4>& quota_percent,
                              int total) {
  double sum = 0.0;
  for (double q : quota_percent) {
    if (q < 0.0) throw InvalidSpec("bin quotas must be non-negative");
    sum += q;
  }
  if (std::abs(sum - 100.0) > 1e-9) {
    throw InvalidSpec("bin quotas must sum to 100");
  }
  std::array<int, 4> counts{};
  std::array<double, 4> remainder{};
  int assigned = 0;
  for (int b = 0; b < 4; ++b) {
    const double exact = quota_percent[b] * total / 100.0;
    counts[b] = static_cast<int>(std::floor(exact + 1e-9));
    remainder[b] = exact - counts[b];
    assigned += counts[b];
  }
  while (assigned < total) {
    const int best = static_cast<int>(
        std::max_element(remainder.begin(), remainder.end()) - remainder.begin());
    ++counts[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return counts;
}

namespace {

// Draw a scenario spec whose delta-theta lands in the target bin. Transitions
// sample the yaw-rate pair directly, so the realized indicator is exact.
ScenarioSpec sample_spec(int target_bin, const BenchmarkConfig& cfg, Rng& rng,
                         std::uint64_t scene_seed) {
  ScenarioSpec spec;
  spec.noise_along = cfg.noise_along;
  spec.noise_cross = cfg.noise_cross;
  spec.occlusion_gain = cfg.occlusion_gain;
  spec.seed = scene_seed;
  spec.speed = rng.uniform(cfg.speed_min, cfg.speed_max);

  const double window = cfg.geometry.history_window;  // delta-theta window
  const auto transition = [&](double delta_theta_target) {
    const double diff = delta_theta_target / window;
    double psi1 = rng.uniform(-1.0, 1.0 - diff);
    double psi2 = psi1 + diff;
    if (rng.uniform() < 0.5) std::swap(psi1, psi2);
    spec.curvature_past = psi1 / spec.speed;
    spec.curvature_future = psi2 / spec.speed;
    spec.kind = std::abs(spec.curvature_future) >= std::abs(spec.curvature_past)
                    ? ScenarioKind::straight_to_turn
                    : ScenarioKind::turn_to_straight;
    if (std::abs(psi1) < 1e-12) spec.kind = ScenarioKind::straight_to_turn;
    if (std::abs(psi2) < 1e-12) spec.kind = ScenarioKind::turn_to_straight;
  };

  if (target_bin == 0) {
    const double pick = rng.uniform();
    if (pick < 0.30) {
      spec.kind = ScenarioKind::straight;
    } else if (pick < 0.65) {
      spec.kind = ScenarioKind::steady_turn;
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double psi_dot = sign * rng.uniform(0.15, 1.0);
      spec.curvature_past = psi_dot / spec.speed;
      spec.curvature_future = spec.curvature_past;
    } else if (pick < 0.80) {
      spec.kind = ScenarioKind::lane_change;
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      spec.curvature_future = sign * rng.uniform(0.3, 1.0) / spec.speed;
    } else {
      transition(rng.uniform(0.08, 0.90));
    }
  } else {
    const double lo = target_bin + 0.05;
    const double hi = target_bin == 3 ? 3.90 : target_bin + 0.95;
    transition(rng.uniform(lo, hi));
  }
  return spec;
}

}  // namespace

int Manifest::split_total(const std::string& name) const {
  for (const auto& [n, bins] : splits) {
    if (n == name) return bins[0] + bins[1] + bins[2] + bins[3];
  }
  throw InvalidValue("manifest has no split named " + name);
}

Manifest generate_benchmark(const BenchmarkConfig& config,
                            const std::filesystem::path& out_dir) {
  const std::array<std::pair<std::string, int>, 3> split_sizes{
      {{"train", config.train_scenes},
       {"val", config.val_scenes},
       {"test", config.test_scenes}}};

  Manifest manifest;
  manifest.schema_version = io::kSchemaVersion;
  manifest.master_seed = config.master_seed;

  std::uint64_t global_index = 0;
  for (const auto& [split, total] : split_sizes) {
    if (total <= 0) throw InvalidSpec("split sizes must be positive");
    const std::array<int, 4> counts = bin_counts(config.bin_quota_percent, total);

    // Interleave bins deterministically so file order is not sorted by bin.
    std::vector<int> targets;
    targets.reserve(total);
    for (int b = 0; b < 4; ++b) {
      targets.insert(targets.end(), counts[b], b);
    }
    std::uint64_t split_tag = 0xCBF29CE484222325ULL;
    for (char c : split) split_tag = (split_tag ^ static_cast<unsigned char>(c)) * 0x100000001B3ULL;
    Rng order_rng(Rng::mix(config.master_seed, split_tag));
    for (int i = total - 1; i > 0; --i) {
      std::swap(targets[i], targets[order_rng.uniform_int(i + 1)]);
    }

    std::array<int, 4> realized{};
    for (int i = 0; i < total; ++i) {
      const std::uint64_t scene_seed = config.master_seed + global_index;
      ++global_index;
      Rng spec_rng(Rng::mix(scene_seed, 0x5CE11E5ULL));
      const ScenarioSpec spec =
          sample_spec(targets[i], config, spec_rng, scene_seed);

      char id[32];
      std::snprintf(id, sizeof(id), "%s_%06d", split.c_str(), i);
      Scene scene = generate_scene(spec, config.geometry, id);

      const int bin = kin::bin_delta_theta(scene.delta_theta_gt);
      if (bin != targets[i]) {
        throw InvalidSpec("generated scene missed its target bin");
      }
      ++realized[bin];
      io::write_scene(out_dir / "scenes" / split / (std::string(id) + ".json"),
                      scene);
    }
    manifest.splits.emplace_back(split, realized);
  }

  io::write_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace mapgate::scenegen
