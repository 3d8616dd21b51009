// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mapgate/types.hpp"

namespace mapgate::metrics {

// A prediction misses when the best final endpoint is more than this far
// from the ground-truth endpoint; exactly on the boundary still counts as a
// hit.
inline constexpr double kMissThreshold = 2.0;

// Minimum over candidates of the mean per-waypoint Euclidean distance.
double min_ade(const CandidateSet& cands, const Trajectory& gt);
// Minimum over candidates of the final-waypoint Euclidean distance.
double min_fde(const CandidateSet& cands, const Trajectory& gt);
// True iff min_fde exceeds kMissThreshold (strictly).
bool miss(const CandidateSet& cands, const Trajectory& gt);

struct StreamMetrics {
  double min_ade = 0.0;
  double min_fde = 0.0;
  bool missed = false;
};

// One evaluated scene: indicator, bin, optional gate weights and per-stream
// metrics. This is also the JSON-lines log schema.
struct SceneLog {
  std::string scene_id;
  double delta_theta = 0.0;
  int bin = 0;
  std::optional<double> w_base;
  std::optional<double> w_unc;
  std::map<std::string, StreamMetrics> streams;
};

struct BinRow {
  std::string stream;
  int bin = -1;  // -1 denotes the overall row
  int n = 0;
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;  // fraction in [0, 1]
};

// Per-bin and overall means per stream. Rows are ordered stream-major with
// bins 0..3 then the overall row. Throws EmptyInput on an empty log.
std::vector<BinRow> binned_report(const std::vector<SceneLog>& logs);

// CSV rendition: header stream,bin,n,minADE,minFDE,MR; the overall row uses
// bin=all; metric columns carry 4 decimals.
std::string render_csv(const std::vector<BinRow>& rows);
nlohmann::json render_json(const std::vector<BinRow>& rows);

nlohmann::json scene_log_to_json(const SceneLog& log);
SceneLog scene_log_from_json(const nlohmann::json& j);
void write_logs_jsonl(const std::filesystem::path& path,
                      const std::vector<SceneLog>& logs);
std::vector<SceneLog> read_logs_jsonl(const std::filesystem::path& path);

}  // namespace mapgate::metrics
