// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mapgate/scene.hpp"
#include "mapgate/scenegen.hpp"

namespace mapgate::io {

// Version of the on-disk scene / manifest schema.
inline constexpr int kSchemaVersion = 1;

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

void write_scene(const std::filesystem::path& path, const Scene& scene);
Scene read_scene(const std::filesystem::path& path);

nlohmann::json manifest_to_json(const scenegen::Manifest& manifest);
scenegen::Manifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const std::filesystem::path& path,
                    const scenegen::Manifest& manifest);
scenegen::Manifest read_manifest(const std::filesystem::path& path);

struct Dataset {
  scenegen::Manifest manifest;
  std::vector<Scene> train;
  std::vector<Scene> val;
  std::vector<Scene> test;

  const std::vector<Scene>& split(const std::string& name) const;
};

// Loads every split listed in <dir>/manifest.json. Scene files are read in
// id order. Throws MissingArtifact when the manifest is absent.
Dataset load_dataset(const std::filesystem::path& dir);

// Writes pretty-printed JSON with a trailing newline (stable byte output).
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace mapgate::io
