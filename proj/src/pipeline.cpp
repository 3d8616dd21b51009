// SPDX-License-Identifier: Apache-2.0
#include "mapgate/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mapgate/kinematics.hpp"
#include "mapgate/svg.hpp"

namespace mapgate::pipeline {

namespace fs = std::filesystem;

Stage stage_from_string(const std::string& s) {
  if (s == "mapper") return Stage::mapper;
  if (s == "predictor-base") return Stage::predictor_base;
  if (s == "predictor-unc") return Stage::predictor_unc;
  if (s == "gate") return Stage::gate;
  throw ConfigError("unknown stage: " + s +
                    " (expected mapper|predictor-base|predictor-unc|gate)");
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::mapper: return "mapper";
    case Stage::predictor_base: return "predictor-base";
    case Stage::predictor_unc: return "predictor-unc";
    case Stage::gate: return "gate";
  }
  return "mapper";
}

fs::path mapper_ckpt(const fs::path& out) { return out / "mapper.ckpt"; }

fs::path predictor_ckpt(const fs::path& out, Stream s) {
  return out / (std::string("predictor_") + mapgate::to_string(s) + ".ckpt");
}

fs::path gate_ckpt(const fs::path& out) { return out / "gate.ckpt"; }

void write_effective_config(const RunConfig& config, const fs::path& out_dir) {
  io::write_json_file(out_dir / "effective_config.json",
                      run_config_to_json(config));
}

scenegen::Manifest generate(const RunConfig& config, const fs::path& data_dir) {
  return scenegen::generate_benchmark(config.dataset, data_dir);
}

void write_loss_curve(const fs::path& path, const std::vector<double>& train,
                      const std::vector<double>& val) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open " + path.string());
  f << "epoch,train_loss,val_loss\n";
  char line[96];
  for (size_t i = 0; i < train.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu,%.10g,%.10g\n", i, train[i], val[i]);
    f << line;
  }
}

namespace {

std::vector<PolylineMap> infer_maps(mapper::Model& model,
                                    const std::vector<Scene>& scenes) {
  std::vector<PolylineMap> maps;
  maps.reserve(scenes.size());
  for (const Scene& s : scenes) maps.push_back(model.infer(s));
  return maps;
}

mapper::Model load_mapper_or_throw(const fs::path& out_dir) {
  const fs::path path = mapper_ckpt(out_dir);
  if (!fs::exists(path)) {
    throw MissingUpstream("mapper checkpoint missing: " + path.string() +
                          " (train the mapper stage first)");
  }
  return mapper::Model::load(path);
}

predictor::Model load_predictor_or_throw(const fs::path& out_dir, Stream s) {
  const fs::path path = predictor_ckpt(out_dir, s);
  if (!fs::exists(path)) {
    throw MissingUpstream("predictor checkpoint missing: " + path.string() +
                          " (train the predictor stages first)");
  }
  return predictor::Model::load(path);
}

// Stream embeddings and error-derived target weights for the gate.
struct GateData {
  Eigen::MatrixXd inputs;   // S x 1024
  Eigen::MatrixXd targets;  // S x 2
};

GateData build_gate_data(const std::vector<Scene>& scenes,
                         const std::vector<PolylineMap>& maps,
                         predictor::Model& base, predictor::Model& unc,
                         const gating::Config& gc) {
  GateData out;
  out.inputs.resize(scenes.size(), 2 * predictor::kEmbeddingWidth);
  out.targets.resize(scenes.size(), 2);
  std::vector<predictor::SceneInputs> inputs(scenes.size());
  for (size_t i = 0; i < scenes.size(); ++i) {
    inputs[i] = predictor::make_inputs(scenes[i], maps[i]);
  }
  const auto base_out = base.forward_batch(inputs);
  const auto unc_out = unc.forward_batch(inputs);
  for (size_t i = 0; i < scenes.size(); ++i) {
    const predictor::StreamOutput& b = base_out[i];
    const predictor::StreamOutput& u = unc_out[i];
    out.inputs.row(i) << b.embedding, u.embedding;
    const double err_base = metrics::min_ade(b.candidates, scenes[i].future_gt);
    const double err_unc = metrics::min_ade(u.candidates, scenes[i].future_gt);
    double wb = 0.5, wu = 0.5;
    if (gc.target_mode == gating::TargetMode::hard) {
      if (err_base < err_unc) wb = 1.0, wu = 0.0;
      if (err_unc < err_base) wb = 0.0, wu = 1.0;
    } else {
      std::tie(wb, wu) =
          gating::make_target_weights(err_base, err_unc, gc.target_temperature);
    }
    out.targets(i, 0) = wb;
    out.targets(i, 1) = wu;
  }
  return out;
}

}  // namespace

void train_stage(const RunConfig& config, Stage stage, const fs::path& data_dir,
                 const fs::path& out_dir) {
  const io::Dataset dataset = io::load_dataset(data_dir);
  fs::create_directories(out_dir);

  switch (stage) {
    case Stage::mapper: {
      mapper::Config mc = config.mapper_for_seed(config.seed);
      mapper::Model model = mapper::Model::init(mc);
      const auto result = mapper::train(model, dataset.train, dataset.val, mc);
      model.save(mapper_ckpt(out_dir), config.seed);
      write_loss_curve(out_dir / "mapper_loss.csv", result.train_curve,
                       result.val_curve);
      return;
    }
    case Stage::predictor_base:
    case Stage::predictor_unc: {
      const Stream stream =
          stage == Stage::predictor_base ? Stream::base : Stream::unc;
      mapper::Model map_model = load_mapper_or_throw(out_dir);
      const auto train_maps = infer_maps(map_model, dataset.train);
      const auto val_maps = infer_maps(map_model, dataset.val);
      predictor::Config pc = config.predictor_for_seed(config.seed);
      predictor::Model model = predictor::Model::init(
          stream, pc, static_cast<int>(dataset.train[0].history.points.rows()));
      const auto result = predictor::train(model, dataset.train, dataset.val,
                                           train_maps, val_maps, pc);
      model.save(predictor_ckpt(out_dir, stream), config.seed);
      write_loss_curve(out_dir / (std::string("predictor_") +
                                  mapgate::to_string(stream) + "_loss.csv"),
                       result.train_curve, result.val_curve);
      return;
    }
    case Stage::gate: {
      mapper::Model map_model = load_mapper_or_throw(out_dir);
      predictor::Model base = load_predictor_or_throw(out_dir, Stream::base);
      predictor::Model unc = load_predictor_or_throw(out_dir, Stream::unc);
      const auto train_maps = infer_maps(map_model, dataset.train);
      const auto val_maps = infer_maps(map_model, dataset.val);
      gating::Config gc = config.gate_for_seed(config.seed);
      const GateData train_data =
          build_gate_data(dataset.train, train_maps, base, unc, gc);
      const GateData val_data =
          build_gate_data(dataset.val, val_maps, base, unc, gc);
      gating::Model model = gating::Model::init(gc);
      const auto result =
          gating::train(model, train_data.inputs, train_data.targets,
                        val_data.inputs, val_data.targets, gc);
      model.save(gate_ckpt(out_dir), config.seed);
      write_loss_curve(out_dir / "gate_loss.csv", result.train_curve,
                       result.val_curve);
      return;
    }
  }
}

std::vector<metrics::SceneLog> evaluate(const RunConfig& config,
                                        const fs::path& data_dir,
                                        const fs::path& out_dir,
                                        const EvalOptions& options) {
  bool want_base = false, want_unc = false, want_gated = false;
  for (const auto& s : options.streams) {
    if (s == "base") want_base = true;
    else if (s == "unc") want_unc = true;
    else if (s == "gated") want_gated = true;
    else throw ConfigError("unknown stream: " + s);
  }
  if (options.streams.empty()) throw ConfigError("no streams requested");
  if (options.split != "train" && options.split != "val" &&
      options.split != "test") {
    throw ConfigError("unknown split: " + options.split);
  }

  const io::Dataset dataset = io::load_dataset(data_dir);
  const std::vector<Scene>& scenes = dataset.split(options.split);

  mapper::Model map_model = load_mapper_or_throw(out_dir);
  std::optional<predictor::Model> base, unc;
  std::optional<gating::Model> gate;
  if (want_base || want_gated) {
    base = load_predictor_or_throw(out_dir, Stream::base);
  }
  if (want_unc || want_gated) {
    unc = load_predictor_or_throw(out_dir, Stream::unc);
  }
  if (want_gated) {
    const fs::path path = gate_ckpt(out_dir);
    if (!fs::exists(path)) {
      throw MissingCheckpoint("gate checkpoint missing: " + path.string());
    }
    gate = gating::Model::load(path);
  }

  std::vector<metrics::SceneLog> logs;
  logs.reserve(scenes.size());
  fs::create_directories(out_dir);
  const fs::path svg_dir = out_dir / "svg";
  if (options.svg_scenes > 0) fs::create_directories(svg_dir);

  std::vector<PolylineMap> maps(scenes.size());
  std::vector<predictor::SceneInputs> all_inputs(scenes.size());
  for (size_t i = 0; i < scenes.size(); ++i) {
    maps[i] = map_model.infer(scenes[i]);
    all_inputs[i] = predictor::make_inputs(scenes[i], maps[i]);
  }
  std::vector<predictor::StreamOutput> base_outs, unc_outs;
  if (base) base_outs = base->forward_batch(all_inputs);
  if (unc) unc_outs = unc->forward_batch(all_inputs);

  for (size_t i = 0; i < scenes.size(); ++i) {
    const Scene& scene = scenes[i];
    const PolylineMap& map = maps[i];

    metrics::SceneLog log;
    log.scene_id = scene.id;
    log.delta_theta = scene.delta_theta_gt;
    log.bin = kin::bin_delta_theta(scene.delta_theta_gt);

    std::map<std::string, CandidateSet> rendered;
    const predictor::StreamOutput* base_out = base ? &base_outs[i] : nullptr;
    const predictor::StreamOutput* unc_out = unc ? &unc_outs[i] : nullptr;

    const auto record = [&](const std::string& name, const CandidateSet& c) {
      metrics::StreamMetrics m;
      m.min_ade = metrics::min_ade(c, scene.future_gt);
      m.min_fde = metrics::min_fde(c, scene.future_gt);
      m.missed = metrics::miss(c, scene.future_gt);
      log.streams[name] = m;
      rendered[name] = c;
    };

    if (want_base) record("base", base_out->candidates);
    if (want_unc) record("unc", unc_out->candidates);
    if (want_gated) {
      const GateDecision decision =
          gate->forward(base_out->embedding, unc_out->embedding);
      log.w_base = decision.w_base;
      log.w_unc = decision.w_unc;
      record("gated",
             gating::fuse_trajectories(base_out->candidates, unc_out->candidates,
                                       decision, config.gate.fusion));
    }
    if (static_cast<int>(i) < options.svg_scenes) {
      std::ofstream f(svg_dir / (scene.id + ".svg"),
                      std::ios::binary | std::ios::trunc);
      f << svg::render_scene(scene, &map, rendered);
    }
    logs.push_back(std::move(log));
  }

  metrics::write_logs_jsonl(out_dir / "scenes.jsonl", logs);
  const auto rows = metrics::binned_report(logs);
  std::ofstream csv(out_dir / "report.csv", std::ios::binary | std::ios::trunc);
  csv << metrics::render_csv(rows);
  csv.close();
  io::write_json_file(out_dir / "report.json", metrics::render_json(rows));
  return logs;
}

std::vector<AblationRow> ablate(const RunConfig& config, const fs::path& data_dir,
                                const fs::path& out_dir, int n_seeds) {
  const io::Dataset dataset = io::load_dataset(data_dir);
  fs::create_directories(out_dir);

  const unc::LossKind kinds[] = {unc::LossKind::laplace_indep,
                                 unc::LossKind::gaussian_indep,
                                 unc::LossKind::gaussian_cov};
  std::vector<AblationRow> rows;
  for (const unc::LossKind kind : kinds) {
    for (int k = 0; k < n_seeds; ++k) {
      const std::uint64_t seed = config.seed + k;

      mapper::Config mc = config.mapper_for_seed(seed);
      mc.loss_kind = kind;
      mapper::Model map_model = mapper::Model::init(mc);
      mapper::train(map_model, dataset.train, dataset.val, mc);

      predictor::Config pc = config.predictor_for_seed(seed);
      predictor::Model unc_model = predictor::Model::init(
          Stream::unc, pc, static_cast<int>(dataset.train[0].history.points.rows()));
      const auto train_maps = infer_maps(map_model, dataset.train);
      const auto val_maps = infer_maps(map_model, dataset.val);
      predictor::train(unc_model, dataset.train, dataset.val, train_maps,
                       val_maps, pc);

      AblationRow row;
      row.variant = unc::to_string(kind);
      row.seed = seed;
      row.mapper_val_nll = mapper::mean_nll(map_model, dataset.test);
      std::vector<predictor::SceneInputs> test_inputs(dataset.test.size());
      for (size_t i = 0; i < dataset.test.size(); ++i) {
        test_inputs[i] = predictor::make_inputs(dataset.test[i],
                                                map_model.infer(dataset.test[i]));
      }
      const auto test_outs = unc_model.forward_batch(test_inputs);
      double ade = 0.0, fde = 0.0, misses = 0.0;
      for (size_t i = 0; i < dataset.test.size(); ++i) {
        const Scene& scene = dataset.test[i];
        const auto& out = test_outs[i];
        ade += metrics::min_ade(out.candidates, scene.future_gt);
        fde += metrics::min_fde(out.candidates, scene.future_gt);
        misses += metrics::miss(out.candidates, scene.future_gt) ? 1.0 : 0.0;
      }
      const double n = static_cast<double>(dataset.test.size());
      row.min_ade = ade / n;
      row.min_fde = fde / n;
      row.miss_rate = misses / n;
      rows.push_back(row);

      map_model.save(out_dir / (row.variant + "_seed" + std::to_string(seed) +
                                "_mapper.ckpt"),
                     seed);
      unc_model.save(out_dir / (row.variant + "_seed" + std::to_string(seed) +
                                "_predictor_unc.ckpt"),
                     seed);
    }
  }

  // CSV with per-run rows plus per-variant aggregates.
  std::ofstream csv(out_dir / "ablation.csv", std::ios::binary | std::ios::trunc);
  csv << "# distribution ablation; laplace w/ covariance variant not "
         "implemented (no closed-form bivariate density in this form)\n";
  csv << "variant,seed,mapper_nll,minADE,minFDE,MR\n";
  char line[192];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%llu,%.6f,%.4f,%.4f,%.4f\n",
                  r.variant.c_str(), static_cast<unsigned long long>(r.seed),
                  r.mapper_val_nll, r.min_ade, r.min_fde, r.miss_rate);
    csv << line;
  }
  nlohmann::json jrows = nlohmann::json::array();
  for (const unc::LossKind kind : kinds) {
    double ade_mean = 0.0, ade_sq = 0.0, nll_mean = 0.0;
    int n = 0;
    for (const auto& r : rows) {
      if (r.variant != unc::to_string(kind)) continue;
      ade_mean += r.min_ade;
      ade_sq += r.min_ade * r.min_ade;
      nll_mean += r.mapper_val_nll;
      ++n;
    }
    ade_mean /= n;
    nll_mean /= n;
    const double ade_std = std::sqrt(std::max(0.0, ade_sq / n - ade_mean * ade_mean));
    std::snprintf(line, sizeof(line), "%s,aggregate,%.6f,%.4f±%.4f,,\n",
                  unc::to_string(kind), nll_mean, ade_mean, ade_std);
    csv << line;
    jrows.push_back({{"variant", unc::to_string(kind)},
                     {"mapper_nll_mean", nll_mean},
                     {"minADE_mean", ade_mean},
                     {"minADE_std", ade_std},
                     {"seeds", n}});
  }
  csv.close();

  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"variant", r.variant},
                         {"seed", r.seed},
                         {"mapper_nll", r.mapper_val_nll},
                         {"minADE", r.min_ade},
                         {"minFDE", r.min_fde},
                         {"MR", r.miss_rate}});
  }
  j["aggregates"] = jrows;
  j["excluded_variants"] = {"laplace_cov"};
  io::write_json_file(out_dir / "ablation.json", j);
  return rows;
}

void report_from_logs(const fs::path& logs_path, const fs::path& out_dir) {
  const auto logs = metrics::read_logs_jsonl(logs_path);
  const auto rows = metrics::binned_report(logs);
  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "report.csv", std::ios::binary | std::ios::trunc);
  csv << metrics::render_csv(rows);
  csv.close();
  io::write_json_file(out_dir / "report.json", metrics::render_json(rows));
}

}  // namespace mapgate::pipeline
