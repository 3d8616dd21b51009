// SPDX-License-Identifier: Apache-2.0
#include "mapgate/mapper.hpp"

#include <algorithm>
#include <numeric>

#include "mapgate/checkpoint.hpp"

namespace mapgate::mapper {

Eigen::MatrixXd context_features(const Scene& scene) {
  Eigen::MatrixXd ctx(scene.vertex_count(), kContextWidth);
  int row = 0;
  for (const auto& e : scene.elements) {
    for (const auto& o : e.observed) {
      ctx(row, 0) = o.dist_to_ego * kDistScale;
      ctx(row, 1) = o.occlusion;
      ctx(row, 2) = o.cls == ElementClass::divider ? 1.0 : 0.0;
      ctx(row, 3) = o.cls == ElementClass::boundary ? 1.0 : 0.0;
      ctx(row, 4) = o.cls == ElementClass::crossing ? 1.0 : 0.0;
      ctx(row, 5) = o.tangent.x();
      ctx(row, 6) = o.tangent.y();
      ++row;
    }
  }
  return ctx;
}

Eigen::MatrixX2d noisy_positions(const Scene& scene) {
  Eigen::MatrixX2d pos(scene.vertex_count(), 2);
  int row = 0;
  for (const auto& e : scene.elements) {
    for (const auto& o : e.observed) pos.row(row++) = o.noisy_xy;
  }
  return pos;
}

Model Model::init(const Config& config) {
  Model m;
  m.loss_kind = config.loss_kind;
  std::vector<int> widths = config.hidden;
  widths.push_back(unc::kParamCols);
  m.net = nn::Mlp::make("mapper", kContextWidth, widths,
                        Rng::mix(config.seed, 0x6D617070ULL),
                        /*zero_init_last=*/true);
  return m;
}

Eigen::MatrixXd Model::head(const Eigen::MatrixXd& context) {
  diff::Tape tape;
  return tape.value(net.forward(tape, tape.constant(context)));
}

Eigen::MatrixXd Model::vertex_params(const Scene& scene) {
  Eigen::MatrixXd out = head(context_features(scene));
  out.leftCols(2) += noisy_positions(scene);
  return out;
}

PolylineMap Model::infer(const Scene& scene) {
  const Eigen::MatrixXd params = vertex_params(scene);
  PolylineMap map;
  int row = 0;
  for (const auto& e : scene.elements) {
    MapElement elem;
    elem.cls = e.cls;
    for (size_t i = 0; i < e.observed.size(); ++i) {
      UncertainVertex v;
      v.mu = {params(row, unc::kMuX), params(row, unc::kMuY)};
      v.cov = CovParams{params(row, unc::kLogSigma1),
                        params(row, unc::kLogSigma2), params(row, unc::kRhoRaw)};
      elem.vertices.push_back(v);
      ++row;
    }
    map.elements.push_back(std::move(elem));
  }
  return map;
}

std::vector<diff::Parameter*> Model::parameters() {
  std::vector<diff::Parameter*> out;
  net.collect(out);
  return out;
}

void Model::save(const std::filesystem::path& path, std::uint64_t seed) {
  nlohmann::json meta;
  meta["model"] = "mapper";
  meta["loss_kind"] = unc::to_string(loss_kind);
  meta["context_width"] = kContextWidth;
  meta["seed"] = seed;
  std::vector<int> widths;
  for (const auto& layer : net.layers) {
    widths.push_back(static_cast<int>(layer.w.value.cols()));
  }
  meta["widths"] = widths;
  ckpt::save(path, meta, ckpt::snapshot(parameters()));
}

Model Model::load(const std::filesystem::path& path) {
  const ckpt::Checkpoint c = ckpt::load(path);
  if (c.meta.at("model") != "mapper") {
    throw IoFailure("not a mapper checkpoint: " + path.string());
  }
  Config config;
  config.loss_kind =
      unc::loss_kind_from_string(c.meta.at("loss_kind").get<std::string>());
  const auto widths = c.meta.at("widths").get<std::vector<int>>();
  config.hidden.assign(widths.begin(), widths.end() - 1);
  Model m = init(config);
  auto params = m.parameters();
  ckpt::restore(c, params);
  return m;
}

namespace {

struct FlatSplit {
  Eigen::MatrixXd context;   // N x 7
  Eigen::MatrixX2d noisy;    // N x 2
  Eigen::MatrixX2d truth;    // N x 2
  std::vector<std::pair<long, long>> scene_rows;  // (start, count) per scene
};

FlatSplit flatten(const std::vector<Scene>& scenes) {
  long total = 0;
  for (const auto& s : scenes) total += s.vertex_count();
  FlatSplit out;
  out.context.resize(total, kContextWidth);
  out.noisy.resize(total, 2);
  out.truth.resize(total, 2);
  long row = 0;
  for (const auto& s : scenes) {
    const long n = s.vertex_count();
    out.context.middleRows(row, n) = context_features(s);
    out.noisy.middleRows(row, n) = noisy_positions(s);
    out.truth.middleRows(row, n) = true_vertex_positions(s);
    out.scene_rows.emplace_back(row, n);
    row += n;
  }
  return out;
}

// Mean per-vertex NLL of head outputs against true positions, no regularizer.
double split_nll(Model& model, const FlatSplit& split) {
  Eigen::MatrixXd params = model.head(split.context);
  params.leftCols(2) += split.noisy;
  return unc::nll(model.loss_kind, params, split.truth, 0.0).loss /
         static_cast<double>(split.truth.rows());
}

}  // namespace

double mean_nll(Model& model, const std::vector<Scene>& scenes) {
  if (scenes.empty()) throw EmptyInput("mean_nll needs scenes");
  return split_nll(model, flatten(scenes));
}

TrainResult train(Model& model, const std::vector<Scene>& train_scenes,
                  const std::vector<Scene>& val_scenes, const Config& config) {
  if (train_scenes.empty() || val_scenes.empty()) {
    throw EmptyInput("mapper training needs non-empty train and val splits");
  }
  const FlatSplit train_flat = flatten(train_scenes);
  const FlatSplit val_flat = flatten(val_scenes);

  auto params = model.parameters();
  nn::AdamConfig adam_config;
  adam_config.lr = config.lr;
  adam_config.clip_norm = config.clip_norm;
  nn::Adam adam(params, adam_config);

  TrainResult result;
  std::vector<ckpt::TensorEntry> best;
  const int n_scenes = static_cast<int>(train_scenes.size());

  std::vector<int> order(n_scenes);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(Rng::mix(config.seed, 0xE50C + epoch));
    for (int i = n_scenes - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
    }

    double epoch_nll = 0.0;
    long epoch_vertices = 0;
    for (int start = 0; start < n_scenes; start += config.batch_scenes) {
      const int count = std::min(config.batch_scenes, n_scenes - start);
      long rows = 0;
      for (int i = 0; i < count; ++i) {
        rows += train_flat.scene_rows[order[start + i]].second;
      }
      Eigen::MatrixXd ctx(rows, kContextWidth);
      Eigen::MatrixX2d noisy(rows, 2), truth(rows, 2);
      long at = 0;
      for (int i = 0; i < count; ++i) {
        const auto [s0, sn] = train_flat.scene_rows[order[start + i]];
        ctx.middleRows(at, sn) = train_flat.context.middleRows(s0, sn);
        noisy.middleRows(at, sn) = train_flat.noisy.middleRows(s0, sn);
        truth.middleRows(at, sn) = train_flat.truth.middleRows(s0, sn);
        at += sn;
      }

      adam.zero_grad();
      diff::Tape tape;
      diff::Var out = model.net.forward(tape, tape.constant(ctx));
      Eigen::MatrixXd vertex_params = tape.value(out);
      vertex_params.leftCols(2) += noisy;

      unc::BatchLoss batch;
      try {
        batch = unc::nll(model.loss_kind, vertex_params, truth, config.lambda_reg);
      } catch (const NonFiniteLoss&) {
        throw NonFiniteLoss("non-finite mapper loss in epoch " +
                            std::to_string(epoch) + ", batch " +
                            std::to_string(start / config.batch_scenes));
      }
      const double scale = config.loss_weight / static_cast<double>(rows);
      diff::Var loss = tape.custom_scalar({out}, batch.loss * scale,
                                          {batch.grad * scale});
      tape.backward(loss);
      adam.step();

      epoch_nll += unc::nll(model.loss_kind, vertex_params, truth, 0.0).loss;
      epoch_vertices += rows;
    }

    result.train_curve.push_back(epoch_nll / static_cast<double>(epoch_vertices));
    const double val = split_nll(model, val_flat);
    result.val_curve.push_back(val);
    if (result.best_epoch < 0 || val < result.best_val) {
      result.best_epoch = epoch;
      result.best_val = val;
      best = ckpt::snapshot(params);
    }
  }

  for (size_t i = 0; i < params.size(); ++i) params[i]->value = best[i].value;
  return result;
}

}  // namespace mapgate::mapper
