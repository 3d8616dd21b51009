// SPDX-License-Identifier: Apache-2.0
// Exit-code and surface checks for the command-line tool; MAPGATE_CLI is the
// path to the built binary.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MAPGATE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path temp_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << text;
}

}  // namespace

TEST_CASE("cli exit codes") {
  const fs::path dir = temp_dir("mapgate_cli_test");
  const fs::path config = dir / "config.json";
  const fs::path bad_quota = dir / "bad_quota.json";
  const fs::path unknown_key = dir / "unknown.json";
  write(config,
        R"({"seed": 3, "dataset": {"train_scenes": 8, "val_scenes": 4, "test_scenes": 4},
            "mapper": {"epochs": 2}, "predictor": {"epochs": 2}, "gate": {"epochs": 2}})");
  write(bad_quota, R"({"dataset": {"bin_quotas": [50, 30, 10, 5]}})");
  write(unknown_key, R"({"sedd": 3})");

  const std::string data = (dir / "data").string();
  const std::string run = (dir / "run").string();

  // config errors -> 2
  CHECK(run_cli("--config " + bad_quota.string() + " generate --out " + data) == 2);
  CHECK(run_cli("--config " + unknown_key.string() + " generate --out " + data) == 2);
  CHECK(run_cli("--config " + (dir / "absent.json").string() + " generate --out " +
                data) == 2);
  CHECK(run_cli("train --data " + data + " --out " + run) == 2);  // missing --stage
  CHECK(run_cli("--config " + config.string() + " train --stage bogus --data " +
                data + " --out " + run) == 2);

  // happy path: generate then the ordered stages
  CHECK(run_cli("--config " + config.string() + " generate --out " + data) == 0);
  CHECK(fs::exists(dir / "data" / "manifest.json"));
  CHECK(fs::exists(dir / "data" / "effective_config.json"));

  // missing upstream artifacts -> 3
  CHECK(run_cli("--config " + config.string() + " train --stage gate --data " +
                data + " --out " + run) == 3);
  CHECK(run_cli("--config " + config.string() + " eval --data " + data +
                " --out " + run) == 3);
  CHECK(run_cli("--config " + config.string() +
                " train --stage mapper --data " + (dir / "absent").string() +
                " --out " + run) == 3);

  for (const char* stage :
       {"mapper", "predictor-base", "predictor-unc", "gate"}) {
    CHECK(run_cli("--config " + config.string() + " train --stage " + stage +
                  " --data " + data + " --out " + run) == 0);
  }
  CHECK(run_cli("--config " + config.string() + " eval --data " + data +
                " --out " + run + " --svg 1") == 0);
  CHECK(fs::exists(dir / "run" / "report.csv"));
  CHECK(fs::exists(dir / "run" / "scenes.jsonl"));
  CHECK(fs::exists(dir / "run" / "run_sidecar.json"));

  // report rebuild from logs
  CHECK(run_cli("report --logs " + (dir / "run" / "scenes.jsonl").string() +
                " --out " + (dir / "rebuilt").string()) == 0);
  CHECK(fs::exists(dir / "rebuilt" / "report.csv"));

  // idempotent rerun: byte-identical report
  const auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
  };
  const std::string before = slurp(dir / "run" / "report.csv");
  CHECK(run_cli("--config " + config.string() + " eval --data " + data +
                " --out " + run) == 0);
  CHECK(slurp(dir / "run" / "report.csv") == before);

  fs::remove_all(dir);
}

TEST_CASE("MAPGATE_OUT resolves relative outputs") {
  const fs::path root = temp_dir("mapgate_cli_root");
  const fs::path config = root / "c.json";
  write(config,
        R"({"dataset": {"train_scenes": 4, "val_scenes": 2, "test_scenes": 2}})");
  const std::string cmd = "MAPGATE_OUT=" + root.string() + " " + MAPGATE_CLI +
                          " --config " + config.string() +
                          " generate --out rel_data >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(fs::exists(root / "rel_data" / "manifest.json"));
  fs::remove_all(root);
}
