// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mapgate/config.hpp"
#include "mapgate/gating.hpp"
#include "mapgate/mapper.hpp"
#include "mapgate/metrics.hpp"
#include "mapgate/predictor.hpp"
#include "mapgate/scene_io.hpp"

namespace mapgate::pipeline {

enum class Stage { mapper, predictor_base, predictor_unc, gate };
Stage stage_from_string(const std::string& s);
const char* to_string(Stage stage);

std::filesystem::path mapper_ckpt(const std::filesystem::path& out);
std::filesystem::path predictor_ckpt(const std::filesystem::path& out, Stream s);
std::filesystem::path gate_ckpt(const std::filesystem::path& out);

void write_effective_config(const RunConfig& config,
                            const std::filesystem::path& out_dir);

// Dataset generation into data_dir (manifest + per-scene files).
scenegen::Manifest generate(const RunConfig& config,
                            const std::filesystem::path& data_dir);

// One training stage; upstream checkpoints must already exist in out_dir.
// Writes <stage>.ckpt and <stage>_loss.csv. Throws MissingUpstream when a
// required earlier checkpoint is absent.
void train_stage(const RunConfig& config, Stage stage,
                 const std::filesystem::path& data_dir,
                 const std::filesystem::path& out_dir);

struct EvalOptions {
  std::vector<std::string> streams{"base", "unc", "gated"};
  int svg_scenes = 0;  // render this many test scenes
  std::string split = "test";
};

// Evaluates the requested streams on a split, writes report.csv/report.json
// plus scenes.jsonl (and svg/ renders when asked), and returns the per-scene
// logs.
std::vector<metrics::SceneLog> evaluate(const RunConfig& config,
                                        const std::filesystem::path& data_dir,
                                        const std::filesystem::path& out_dir,
                                        const EvalOptions& options = {});

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double mapper_val_nll = 0.0;  // held-out NLL of the trained mapper
  double min_ade = 0.0;         // unc-stream metrics on the test split
  double min_fde = 0.0;
  double miss_rate = 0.0;
};

// Distribution ablation: trains mapper + unc predictor under each loss kind
// for n_seeds consecutive seeds and reports per-variant metrics. Writes
// ablation.csv and ablation.json under out_dir.
std::vector<AblationRow> ablate(const RunConfig& config,
                                const std::filesystem::path& data_dir,
                                const std::filesystem::path& out_dir,
                                int n_seeds = 3);

// Rebuild reports from raw per-scene logs.
void report_from_logs(const std::filesystem::path& logs_path,
                      const std::filesystem::path& out_dir);

void write_loss_curve(const std::filesystem::path& path,
                      const std::vector<double>& train,
                      const std::vector<double>& val);

}  // namespace mapgate::pipeline
