// SPDX-License-Identifier: Apache-2.0
#include "mapgate/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "mapgate/kinematics.hpp"

namespace mapgate::metrics {

namespace {

void check_horizons(const CandidateSet& cands, const Trajectory& gt) {
  if (cands.trajectories.empty()) throw EmptyInput("no candidates");
  for (const auto& t : cands.trajectories) {
    if (t.rows() != gt.points.rows()) {
      throw HorizonMismatch("candidate horizon " + std::to_string(t.rows()) +
                            " vs ground truth " +
                            std::to_string(gt.points.rows()));
    }
  }
}

}  // namespace

double min_ade(const CandidateSet& cands, const Trajectory& gt) {
  check_horizons(cands, gt);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : cands.trajectories) {
    const double ade = (t - gt.points).rowwise().norm().mean();
    best = std::min(best, ade);
  }
  return best;
}

double min_fde(const CandidateSet& cands, const Trajectory& gt) {
  check_horizons(cands, gt);
  const long last = gt.points.rows() - 1;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : cands.trajectories) {
    const double fde = (t.row(last) - gt.points.row(last)).norm();
    best = std::min(best, fde);
  }
  return best;
}

bool miss(const CandidateSet& cands, const Trajectory& gt) {
  return min_fde(cands, gt) > kMissThreshold;
}

std::vector<BinRow> binned_report(const std::vector<SceneLog>& logs) {
  if (logs.empty()) throw EmptyInput("binned_report needs at least one scene");

  // stream -> bin (0..3 plus 4 for overall) -> accumulators
  std::map<std::string, std::array<BinRow, kin::kNumBins + 1>> acc;
  for (const auto& log : logs) {
    if (log.bin < 0 || log.bin >= kin::kNumBins) {
      throw InvalidValue("scene log carries an out-of-range bin");
    }
    for (const auto& [stream, m] : log.streams) {
      auto& rows = acc[stream];
      for (const int slot : {log.bin, kin::kNumBins}) {
        rows[slot].n += 1;
        rows[slot].min_ade += m.min_ade;
        rows[slot].min_fde += m.min_fde;
        rows[slot].miss_rate += m.missed ? 1.0 : 0.0;
      }
    }
  }

  std::vector<BinRow> out;
  for (auto& [stream, rows] : acc) {
    for (int slot = 0; slot <= kin::kNumBins; ++slot) {
      BinRow row = rows[slot];
      row.stream = stream;
      row.bin = slot == kin::kNumBins ? -1 : slot;
      if (row.n > 0) {
        row.min_ade /= row.n;
        row.min_fde /= row.n;
        row.miss_rate /= row.n;
      }
      out.push_back(row);
    }
  }
  return out;
}

std::string render_csv(const std::vector<BinRow>& rows) {
  std::string out = "stream,bin,n,minADE,minFDE,MR\n";
  char line[160];
  for (const auto& r : rows) {
    if (r.bin < 0) {
      std::snprintf(line, sizeof(line), "%s,all,%d,%.4f,%.4f,%.4f\n",
                    r.stream.c_str(), r.n, r.min_ade, r.min_fde, r.miss_rate);
    } else {
      std::snprintf(line, sizeof(line), "%s,%d,%d,%.4f,%.4f,%.4f\n",
                    r.stream.c_str(), r.bin, r.n, r.min_ade, r.min_fde,
                    r.miss_rate);
    }
    out += line;
  }
  return out;
}

nlohmann::json render_json(const std::vector<BinRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"stream", r.stream},
                   {"bin", r.bin < 0 ? nlohmann::json("all") : nlohmann::json(r.bin)},
                   {"n", r.n},
                   {"minADE", r.min_ade},
                   {"minFDE", r.min_fde},
                   {"MR", r.miss_rate}});
  }
  return arr;
}

nlohmann::json scene_log_to_json(const SceneLog& log) {
  nlohmann::json j;
  j["scene_id"] = log.scene_id;
  j["delta_theta"] = log.delta_theta;
  j["bin"] = log.bin;
  if (log.w_base) j["w_base"] = *log.w_base;
  if (log.w_unc) j["w_unc"] = *log.w_unc;
  nlohmann::json streams = nlohmann::json::object();
  for (const auto& [name, m] : log.streams) {
    streams[name] = {{"min_ade", m.min_ade},
                     {"min_fde", m.min_fde},
                     {"missed", m.missed}};
  }
  j["streams"] = std::move(streams);
  return j;
}

SceneLog scene_log_from_json(const nlohmann::json& j) {
  SceneLog log;
  log.scene_id = j.at("scene_id").get<std::string>();
  log.delta_theta = j.at("delta_theta").get<double>();
  log.bin = j.at("bin").get<int>();
  if (j.contains("w_base")) log.w_base = j.at("w_base").get<double>();
  if (j.contains("w_unc")) log.w_unc = j.at("w_unc").get<double>();
  for (const auto& [name, m] : j.at("streams").items()) {
    StreamMetrics sm;
    sm.min_ade = m.at("min_ade").get<double>();
    sm.min_fde = m.at("min_fde").get<double>();
    sm.missed = m.at("missed").get<bool>();
    log.streams[name] = sm;
  }
  return log;
}

void write_logs_jsonl(const std::filesystem::path& path,
                      const std::vector<SceneLog>& logs) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open " + path.string() + " for writing");
  for (const auto& log : logs) {
    f << scene_log_to_json(log).dump() << "\n";
  }
  if (!f) throw IoFailure("short write to " + path.string());
}

std::vector<SceneLog> read_logs_jsonl(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingArtifact("log file not found: " + path.string());
  std::vector<SceneLog> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    out.push_back(scene_log_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace mapgate::metrics
