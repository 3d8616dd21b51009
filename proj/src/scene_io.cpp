// SPDX-License-Identifier: Apache-2.0
#include "mapgate/scene_io.hpp"

#include <fstream>

namespace mapgate::io {

namespace {

nlohmann::json points_to_json(const Eigen::MatrixX2d& pts) {
  nlohmann::json arr = nlohmann::json::array();
  for (long i = 0; i < pts.rows(); ++i) {
    arr.push_back({pts(i, 0), pts(i, 1)});
  }
  return arr;
}

Eigen::MatrixX2d points_from_json(const nlohmann::json& arr) {
  Eigen::MatrixX2d pts(arr.size(), 2);
  for (size_t i = 0; i < arr.size(); ++i) {
    pts(static_cast<long>(i), 0) = arr[i][0].get<double>();
    pts(static_cast<long>(i), 1) = arr[i][1].get<double>();
  }
  return pts;
}

}  // namespace

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["id"] = scene.id;
  j["dt"] = scene.dt;
  j["history"] = points_to_json(scene.history.points);
  j["future_gt"] = points_to_json(scene.future_gt.points);
  j["delta_theta_gt"] = scene.delta_theta_gt;

  nlohmann::json elements = nlohmann::json::array();
  for (const auto& e : scene.elements) {
    nlohmann::json je;
    je["class"] = to_string(e.cls);
    je["true_pts"] = points_to_json(e.true_pts);
    nlohmann::json observed = nlohmann::json::array();
    for (const auto& o : e.observed) {
      observed.push_back({{"xy", {o.noisy_xy.x(), o.noisy_xy.y()}},
                          {"context",
                           {{"dist_to_ego", o.dist_to_ego},
                            {"occlusion", o.occlusion},
                            {"class", to_string(o.cls)},
                            {"tangent", {o.tangent.x(), o.tangent.y()}}}}});
    }
    je["observed"] = observed;
    nlohmann::json cov = nlohmann::json::array();
    for (const auto& c : e.true_cov) cov.push_back({c.x(), c.y(), c.z()});
    je["true_cov"] = cov;
    elements.push_back(std::move(je));
  }
  j["map"] = {{"elements", std::move(elements)}};
  return j;
}

Scene scene_from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != kSchemaVersion) {
    throw IoFailure("unsupported scene schema version");
  }
  Scene s;
  s.id = j.at("id").get<std::string>();
  s.dt = j.at("dt").get<double>();
  s.history.dt = s.dt;
  s.history.points = points_from_json(j.at("history"));
  s.future_gt.dt = s.dt;
  s.future_gt.points = points_from_json(j.at("future_gt"));
  s.delta_theta_gt = j.at("delta_theta_gt").get<double>();

  for (const auto& je : j.at("map").at("elements")) {
    SceneElement e;
    e.cls = element_class_from_string(je.at("class").get<std::string>());
    e.true_pts = points_from_json(je.at("true_pts"));
    for (const auto& jo : je.at("observed")) {
      VertexObservation o;
      o.noisy_xy = {jo.at("xy")[0].get<double>(), jo.at("xy")[1].get<double>()};
      const auto& ctx = jo.at("context");
      o.dist_to_ego = ctx.at("dist_to_ego").get<double>();
      o.occlusion = ctx.at("occlusion").get<double>();
      o.cls = element_class_from_string(ctx.at("class").get<std::string>());
      o.tangent = {ctx.at("tangent")[0].get<double>(),
                   ctx.at("tangent")[1].get<double>()};
      e.observed.push_back(o);
    }
    for (const auto& jc : je.at("true_cov")) {
      e.true_cov.emplace_back(jc[0].get<double>(), jc[1].get<double>(),
                              jc[2].get<double>());
    }
    if (e.observed.size() != static_cast<size_t>(e.true_pts.rows()) ||
        e.true_cov.size() != e.observed.size()) {
      throw IoFailure("scene element arrays disagree in length");
    }
    s.elements.push_back(std::move(e));
  }
  check_trajectory(s.history);
  check_trajectory(s.future_gt);
  return s;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open " + path.string() + " for writing");
  f << j.dump(2) << "\n";
  if (!f) throw IoFailure("short write to " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingArtifact("file not found: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoFailure("invalid json in " + path.string() + ": " + e.what());
  }
  return j;
}

void write_scene(const std::filesystem::path& path, const Scene& scene) {
  write_json_file(path, scene_to_json(scene));
}

Scene read_scene(const std::filesystem::path& path) {
  return scene_from_json(read_json_file(path));
}

nlohmann::json manifest_to_json(const scenegen::Manifest& manifest) {
  nlohmann::json j;
  j["schema_version"] = manifest.schema_version;
  j["master_seed"] = manifest.master_seed;
  nlohmann::json splits = nlohmann::json::object();
  for (const auto& [name, bins] : manifest.splits) {
    splits[name] = {{"bins", {bins[0], bins[1], bins[2], bins[3]}},
                    {"count", bins[0] + bins[1] + bins[2] + bins[3]}};
  }
  j["splits"] = std::move(splits);
  return j;
}

scenegen::Manifest manifest_from_json(const nlohmann::json& j) {
  scenegen::Manifest m;
  m.schema_version = j.at("schema_version").get<int>();
  if (m.schema_version != kSchemaVersion) {
    throw IoFailure("unsupported manifest schema version");
  }
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  for (const auto& [name, body] : j.at("splits").items()) {
    std::array<int, 4> bins{};
    for (int b = 0; b < 4; ++b) bins[b] = body.at("bins")[b].get<int>();
    m.splits.emplace_back(name, bins);
  }
  return m;
}

void write_manifest(const std::filesystem::path& path,
                    const scenegen::Manifest& manifest) {
  write_json_file(path, manifest_to_json(manifest));
}

scenegen::Manifest read_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_json_file(path));
}

const std::vector<Scene>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw InvalidValue("unknown split: " + name);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset out;
  out.manifest = read_manifest(dir / "manifest.json");
  for (const auto& [name, bins] : out.manifest.splits) {
    const int count = bins[0] + bins[1] + bins[2] + bins[3];
    std::vector<Scene>* target = nullptr;
    if (name == "train") target = &out.train;
    else if (name == "val") target = &out.val;
    else if (name == "test") target = &out.test;
    else throw IoFailure("manifest lists unknown split: " + name);
    target->reserve(count);
    for (int i = 0; i < count; ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%06d", name.c_str(), i);
      target->push_back(read_scene(dir / "scenes" / name / (std::string(id) + ".json")));
    }
  }
  return out;
}

}  // namespace mapgate::io
