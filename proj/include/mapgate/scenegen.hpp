// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mapgate/scene.hpp"

namespace mapgate::scenegen {

enum class ScenarioKind {
  straight,
  steady_turn,
  straight_to_turn,
  turn_to_straight,
  lane_change,
};
const char* to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& s);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::straight;
  double speed = 5.0;             // m/s
  double curvature_past = 0.0;    // 1/m
  double curvature_future = 0.0;  // 1/m
  double noise_along = 0.5;       // m, along the local tangent
  double noise_cross = 0.05;      // m, across it
  double occlusion_gain = 2.0;    // noise scale factor is 1 + gain * occlusion
  // Optional explicit per-vertex occlusion values; when empty a smooth
  // blob profile is drawn from the seed.
  std::vector<double> occlusion_profile;
  std::uint64_t seed = 0;
};

struct GeometryConfig {
  double dt = 0.5;              // s between waypoints
  double history_window = 2.0;  // s
  double horizon = 3.0;         // s
  double blend = 0.5;           // s of linear curvature blending at t = 0
  double lane_half_width = 1.75;  // m
  double vertex_spacing = 2.0;    // m along each polyline
  double map_lead = 0.5;          // s of extra map beyond the horizon
};

// Throws InvalidSpec when the spec breaks its invariants (speed <= 0,
// negative noise scales, |curvature| * speed > 1, kind/curvature mismatch).
void check_spec(const ScenarioSpec& spec, const GeometryConfig& geometry);

// Deterministic scene construction from the particle kinematic model: the ego
// integrates the curvature profile exactly, the map is the path plus two lane
// boundaries, and every observed vertex is the true vertex plus
// tangent-aligned noise R(tangent) * diag(scales) * z with the exact
// covariance recorded alongside.
Scene generate_scene(const ScenarioSpec& spec, const GeometryConfig& geometry = {},
                     const std::string& id = "scene");

struct SplitQuota {
  std::string name;
  int scenes = 0;
};

struct BenchmarkConfig {
  std::string dir = "data/bench";  // default dataset location for the cli
  int train_scenes = 1000;
  int val_scenes = 200;
  int test_scenes = 200;
  std::array<double, 4> bin_quota_percent{52.0, 28.0, 12.0, 8.0};
  double speed_min = 4.0;
  double speed_max = 8.0;
  double noise_along = 0.5;
  double noise_cross = 0.05;
  // The benchmark leans on occluders much harder than the per-scene default:
  // a blacked-out lookahead is what separates an uncertainty-aware map reader
  // from a blind one.
  double occlusion_gain = 24.0;
  std::uint64_t master_seed = 7;
  GeometryConfig geometry;
};

struct Manifest {
  int schema_version = 1;
  std::uint64_t master_seed = 0;
  // split name -> scene count per delta-theta bin
  std::vector<std::pair<std::string, std::array<int, 4>>> splits;

  int split_total(const std::string& name) const;
};

// Writes manifest.json plus scenes/<split>/<id>.json under out_dir and
// returns the manifest. Scene seeds are master_seed + global index, so any
// deterministic partition of indices regenerates identical data.
Manifest generate_benchmark(const BenchmarkConfig& config,
                            const std::filesystem::path& out_dir);

// Exact per-bin counts for a split: floor of quota, remainders assigned
// largest-first.
std::array<int, 4> bin_counts(const std::array<double, 4>& quota_percent,
                              int total);

}  // namespace mapgate::scenegen
