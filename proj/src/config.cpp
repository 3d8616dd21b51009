// SPDX-License-Identifier: Apache-2.0
#include "mapgate/config.hpp"

#include <set>

#include "mapgate/scene_io.hpp"

namespace mapgate {

namespace {

void require_keys(const nlohmann::json& j, const std::set<std::string>& known,
                  const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a json object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw ConfigError("unknown config key \"" + key + "\" in " + where);
    }
  }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad value for \"") + key + "\": " + e.what());
    }
  }
}

void parse_dataset(const nlohmann::json& j, scenegen::BenchmarkConfig& out) {
  require_keys(j,
               {"dir", "train_scenes", "val_scenes", "test_scenes",
                "bin_quotas", "speed_min", "speed_max", "noise_along",
                "noise_cross", "occlusion_gain"},
               "dataset");
  maybe(j, "dir", out.dir);
  maybe(j, "train_scenes", out.train_scenes);
  maybe(j, "val_scenes", out.val_scenes);
  maybe(j, "test_scenes", out.test_scenes);
  if (j.contains("bin_quotas")) {
    const auto q = j.at("bin_quotas").get<std::vector<double>>();
    if (q.size() != 4) throw ConfigError("bin_quotas needs 4 entries");
    std::copy(q.begin(), q.end(), out.bin_quota_percent.begin());
  }
  maybe(j, "speed_min", out.speed_min);
  maybe(j, "speed_max", out.speed_max);
  maybe(j, "noise_along", out.noise_along);
  maybe(j, "noise_cross", out.noise_cross);
  maybe(j, "occlusion_gain", out.occlusion_gain);
}

void parse_mapper(const nlohmann::json& j, mapper::Config& out) {
  require_keys(j, {"hidden", "loss_kind", "lambda_reg", "loss_weight", "lr",
                   "epochs"},
               "mapper");
  maybe(j, "hidden", out.hidden);
  if (j.contains("loss_kind")) {
    out.loss_kind =
        unc::loss_kind_from_string(j.at("loss_kind").get<std::string>());
  }
  maybe(j, "lambda_reg", out.lambda_reg);
  maybe(j, "loss_weight", out.loss_weight);
  maybe(j, "lr", out.lr);
  maybe(j, "epochs", out.epochs);
}

void parse_predictor(const nlohmann::json& j, predictor::Config& out) {
  require_keys(j, {"vertex_widths", "history_widths", "trunk_widths", "dropout",
                   "lr", "epochs"},
               "predictor");
  maybe(j, "vertex_widths", out.vertex_widths);
  maybe(j, "history_widths", out.history_widths);
  maybe(j, "trunk_widths", out.trunk_widths);
  maybe(j, "dropout", out.dropout);
  maybe(j, "lr", out.lr);
  maybe(j, "epochs", out.epochs);
}

void parse_gate(const nlohmann::json& j, gating::Config& out) {
  require_keys(j, {"temperature", "target_mode", "target_temperature",
                   "dropout", "lr", "epochs", "fusion"},
               "gate");
  maybe(j, "temperature", out.temperature);
  maybe(j, "target_temperature", out.target_temperature);
  maybe(j, "dropout", out.dropout);
  maybe(j, "lr", out.lr);
  maybe(j, "epochs", out.epochs);
  if (j.contains("fusion")) {
    out.fusion = gating::fusion_from_string(j.at("fusion").get<std::string>());
  }
  if (j.contains("target_mode")) {
    out.target_mode =
        gating::target_mode_from_string(j.at("target_mode").get<std::string>());
  }
}

void validate(const RunConfig& c) {
  double quota_sum = 0.0;
  for (double q : c.dataset.bin_quota_percent) {
    if (q < 0.0) throw ConfigError("bin quotas must be non-negative");
    quota_sum += q;
  }
  if (std::abs(quota_sum - 100.0) > 1e-9) {
    throw ConfigError("bin quotas must sum to 100");
  }
  if (!(c.mapper.lr > 0.0) || !(c.predictor.lr > 0.0) || !(c.gate.lr > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  if (!(c.gate.temperature > 0.0) || !(c.gate.target_temperature > 0.0)) {
    throw ConfigError("temperatures must be positive");
  }
  if (c.predictor.dropout < 0.0 || c.predictor.dropout >= 1.0 ||
      c.gate.dropout < 0.0 || c.gate.dropout >= 1.0) {
    throw ConfigError("dropout must be in [0, 1)");
  }
  if (c.batch_scenes <= 0) throw ConfigError("batch size must be positive");
  if (c.mapper.epochs <= 0 || c.predictor.epochs <= 0 || c.gate.epochs <= 0) {
    throw ConfigError("epoch counts must be positive");
  }
  if (c.dataset.speed_min <= 0.0 || c.dataset.speed_max < c.dataset.speed_min) {
    throw ConfigError("speed range is invalid");
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
  require_keys(j, {"seed", "batch_scenes", "clip_norm", "dataset", "mapper",
                   "predictor", "gate"},
               "config root");
  RunConfig c;
  maybe(j, "seed", c.seed);
  maybe(j, "batch_scenes", c.batch_scenes);
  maybe(j, "clip_norm", c.clip_norm);
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), c.dataset);
  if (j.contains("mapper")) parse_mapper(j.at("mapper"), c.mapper);
  if (j.contains("predictor")) parse_predictor(j.at("predictor"), c.predictor);
  if (j.contains("gate")) parse_gate(j.at("gate"), c.gate);

  c.dataset.master_seed = c.seed;
  validate(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = io::read_json_file(path);
  } catch (const MissingArtifact&) {
    throw ConfigError("config file not found: " + path.string());
  } catch (const IoFailure& e) {
    throw ConfigError(e.what());
  }
  return run_config_from_json(j);
}

mapper::Config RunConfig::mapper_for_seed(std::uint64_t run_seed) const {
  mapper::Config out = mapper;
  out.seed = run_seed;
  out.batch_scenes = batch_scenes;
  out.clip_norm = clip_norm;
  return out;
}

predictor::Config RunConfig::predictor_for_seed(std::uint64_t run_seed) const {
  predictor::Config out = predictor;
  out.seed = run_seed;
  out.batch_scenes = batch_scenes;
  out.clip_norm = clip_norm;
  return out;
}

gating::Config RunConfig::gate_for_seed(std::uint64_t run_seed) const {
  gating::Config out = gate;
  out.seed = run_seed;
  out.batch = batch_scenes;
  out.clip_norm = clip_norm;
  return out;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["batch_scenes"] = c.batch_scenes;
  j["clip_norm"] = c.clip_norm;
  j["dataset"] = {
      {"dir", c.dataset.dir},
      {"train_scenes", c.dataset.train_scenes},
      {"val_scenes", c.dataset.val_scenes},
      {"test_scenes", c.dataset.test_scenes},
      {"bin_quotas",
       {c.dataset.bin_quota_percent[0], c.dataset.bin_quota_percent[1],
        c.dataset.bin_quota_percent[2], c.dataset.bin_quota_percent[3]}},
      {"speed_min", c.dataset.speed_min},
      {"speed_max", c.dataset.speed_max},
      {"noise_along", c.dataset.noise_along},
      {"noise_cross", c.dataset.noise_cross},
      {"occlusion_gain", c.dataset.occlusion_gain}};
  j["mapper"] = {{"hidden", c.mapper.hidden},
                 {"loss_kind", unc::to_string(c.mapper.loss_kind)},
                 {"lambda_reg", c.mapper.lambda_reg},
                 {"loss_weight", c.mapper.loss_weight},
                 {"lr", c.mapper.lr},
                 {"epochs", c.mapper.epochs}};
  j["predictor"] = {{"vertex_widths", c.predictor.vertex_widths},
                    {"history_widths", c.predictor.history_widths},
                    {"trunk_widths", c.predictor.trunk_widths},
                    {"dropout", c.predictor.dropout},
                    {"lr", c.predictor.lr},
                    {"epochs", c.predictor.epochs}};
  j["gate"] = {{"temperature", c.gate.temperature},
               {"target_mode", gating::to_string(c.gate.target_mode)},
               {"target_temperature", c.gate.target_temperature},
               {"dropout", c.gate.dropout},
               {"lr", c.gate.lr},
               {"epochs", c.gate.epochs},
               {"fusion", gating::to_string(c.gate.fusion)}};
  return j;
}

}  // namespace mapgate
