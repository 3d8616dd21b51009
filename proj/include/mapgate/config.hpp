// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mapgate/gating.hpp"
#include "mapgate/mapper.hpp"
#include "mapgate/predictor.hpp"
#include "mapgate/scenegen.hpp"

namespace mapgate {

// Full experiment configuration. Every field has a default; a config file
// overrides selectively and unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 7;
  int batch_scenes = 32;
  double clip_norm = 3.0;

  scenegen::BenchmarkConfig dataset;
  mapper::Config mapper;
  predictor::Config predictor;
  gating::Config gate;

  // Derived configs carry the shared seed/batch/clip values.
  mapper::Config mapper_for_seed(std::uint64_t run_seed) const;
  predictor::Config predictor_for_seed(std::uint64_t run_seed) const;
  gating::Config gate_for_seed(std::uint64_t run_seed) const;
};

// Strict parse: unknown keys anywhere raise ConfigError, as do quota sums
// away from 100, non-positive rates/temperatures, and malformed enums.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Fully materialized echo of the effective configuration.
nlohmann::json run_config_to_json(const RunConfig& config);

}  // namespace mapgate
