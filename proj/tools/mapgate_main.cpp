// SPDX-License-Identifier: Apache-2.0
//
// mapgate: synthetic benchmark for scenario-gated map-uncertainty trajectory
// prediction. Subcommands: generate, train, eval, ablate, report.

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mapgate/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mapgate;

namespace {

// Success 0, config error 2, missing dependency artifact 3, numerical
// failure 4, anything else 1.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumerical = 4;

fs::path resolve_out(const std::string& out) {
  fs::path p(out);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("MAPGATE_OUT")) {
    return fs::path(root) / p;
  }
  return p;
}

RunConfig load_config(const std::string& config_path, long long seed_override) {
  RunConfig config;
  if (!config_path.empty()) config = load_run_config(config_path);
  if (seed_override >= 0) {
    config.seed = static_cast<std::uint64_t>(seed_override);
    config.dataset.master_seed = config.seed;
  }
  return config;
}

// Wall-clock info lives only in this sidecar so every other artifact is
// byte-reproducible.
void write_sidecar(const fs::path& out_dir, const std::string& command,
                   double seconds) {
  fs::create_directories(out_dir);
  nlohmann::json j;
  j["command"] = command;
  j["duration_seconds"] = seconds;
  j["finished_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();
  std::ofstream f(out_dir / "run_sidecar.json", std::ios::binary | std::ios::trunc);
  f << j.dump(2) << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"scenario-gated map-uncertainty trajectory prediction lab"};
  app.require_subcommand(1);

  std::string config_path;
  long long seed_override = -1;
  app.add_option("--config", config_path, "json config file");
  app.add_option("--seed", seed_override, "override the config seed");

  std::string gen_out;
  auto* cmd_generate = app.add_subcommand("generate", "build the benchmark dataset");
  cmd_generate->add_option("--out", gen_out, "dataset directory");

  std::string train_stage_name, train_data, train_out = "runs/default";
  auto* cmd_train = app.add_subcommand("train", "train one pipeline stage");
  cmd_train->add_option("--stage", train_stage_name,
                        "mapper|predictor-base|predictor-unc|gate")
      ->required();
  cmd_train->add_option("--data", train_data, "dataset directory");
  cmd_train->add_option("--out", train_out, "run directory for checkpoints");

  std::string eval_data, eval_out = "runs/default";
  std::string eval_streams = "base,unc,gated";
  std::string eval_split = "test";
  int eval_svg = 0;
  auto* cmd_eval = app.add_subcommand("eval", "evaluate trained streams");
  cmd_eval->add_option("--data", eval_data, "dataset directory");
  cmd_eval->add_option("--out", eval_out, "run directory (reports written here)");
  cmd_eval->add_option("--streams", eval_streams, "comma list of base,unc,gated");
  cmd_eval->add_option("--split", eval_split, "train|val|test");
  cmd_eval->add_option("--svg", eval_svg, "render this many scene svgs");

  std::string ablate_data, ablate_out = "runs/ablation";
  int ablate_seeds = 3;
  auto* cmd_ablate =
      app.add_subcommand("ablate", "compare uncertainty distributions");
  cmd_ablate->add_option("--data", ablate_data, "dataset directory");
  cmd_ablate->add_option("--out", ablate_out, "output directory");
  cmd_ablate->add_option("--seeds", ablate_seeds, "number of seeds");

  std::string report_logs, report_out = "runs/report";
  auto* cmd_report =
      app.add_subcommand("report", "rebuild reports from per-scene logs");
  cmd_report->add_option("--logs", report_logs, "scenes.jsonl path")->required();
  cmd_report->add_option("--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const auto started = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         started)
        .count();
  };

  const RunConfig config = load_config(config_path, seed_override);
  const auto data_or_default = [&](const std::string& flag) {
    return resolve_out(flag.empty() ? config.dataset.dir : flag);
  };

  if (cmd_generate->parsed()) {
    const fs::path out = data_or_default(gen_out);
    const auto manifest = pipeline::generate(config, out);
    pipeline::write_effective_config(config, out);
    std::cout << "dataset written to " << out.string() << "\n";
    for (const auto& [split, bins] : manifest.splits) {
      std::cout << "  " << split << ": " << manifest.split_total(split)
                << " scenes, bins [" << bins[0] << ", " << bins[1] << ", "
                << bins[2] << ", " << bins[3] << "]\n";
    }
    write_sidecar(out, "generate", elapsed());
    return kExitOk;
  }

  if (cmd_train->parsed()) {
    const fs::path out = resolve_out(train_out);
    const auto stage = pipeline::stage_from_string(train_stage_name);
    pipeline::train_stage(config, stage, data_or_default(train_data), out);
    pipeline::write_effective_config(config, out);
    std::cout << "stage " << pipeline::to_string(stage) << " done; artifacts in "
              << out.string() << "\n";
    write_sidecar(out, std::string("train ") + pipeline::to_string(stage),
                  elapsed());
    return kExitOk;
  }

  if (cmd_eval->parsed()) {
    const fs::path out = resolve_out(eval_out);
    pipeline::EvalOptions options;
    options.streams.clear();
    std::string token;
    for (std::stringstream ss(eval_streams); std::getline(ss, token, ',');) {
      if (!token.empty()) options.streams.push_back(token);
    }
    options.svg_scenes = eval_svg;
    options.split = eval_split;
    pipeline::evaluate(config, data_or_default(eval_data), out, options);
    pipeline::write_effective_config(config, out);
    std::ifstream csv(out / "report.csv");
    std::cout << csv.rdbuf();
    write_sidecar(out, "eval", elapsed());
    return kExitOk;
  }

  if (cmd_ablate->parsed()) {
    const fs::path out = resolve_out(ablate_out);
    pipeline::ablate(config, data_or_default(ablate_data), out, ablate_seeds);
    pipeline::write_effective_config(config, out);
    std::ifstream csv(out / "ablation.csv");
    std::cout << csv.rdbuf();
    write_sidecar(out, "ablate", elapsed());
    return kExitOk;
  }

  if (cmd_report->parsed()) {
    const fs::path out = resolve_out(report_out);
    pipeline::report_from_logs(report_logs, out);
    std::ifstream csv(out / "report.csv");
    std::cout << csv.rdbuf();
    write_sidecar(out, "report", elapsed());
    return kExitOk;
  }

  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidSpec& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return kExitMissing;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
