// SPDX-License-Identifier: Apache-2.0
#include "mapgate/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mapgate/checkpoint.hpp"

namespace mapgate::predictor {

namespace {

constexpr int kVertexFeatures = 5;

int stream_input_width(Stream stream) {
  return stream == Stream::base ? 2 : kVertexFeatures;
}

Eigen::RowVectorXd flatten_points(const Eigen::MatrixX2d& pts) {
  Eigen::RowVectorXd flat(pts.rows() * 2);
  for (long i = 0; i < pts.rows(); ++i) {
    flat(2 * i) = pts(i, 0);
    flat(2 * i + 1) = pts(i, 1);
  }
  return flat;
}

}  // namespace

SceneInputs make_inputs(const Scene& scene, const PolylineMap& map) {
  check_trajectory(scene.history);
  SceneInputs in;

  const long last = scene.history.points.rows() - 1;
  in.origin = scene.history.points.row(last);
  Eigen::Vector2d dir =
      scene.history.points.row(last) - scene.history.points.row(last - 1);
  if (dir.norm() < 1e-9) dir = {1.0, 0.0};
  dir.normalize();
  in.rot << dir.x(), -dir.y(), dir.y(), dir.x();

  const auto to_ego = [&](const Eigen::Vector2d& p) -> Eigen::Vector2d {
    return in.rot.transpose() * (p - in.origin);
  };

  Eigen::MatrixX2d hist_ego(scene.history.points.rows(), 2);
  for (long i = 0; i < hist_ego.rows(); ++i) {
    hist_ego.row(i) = to_ego(scene.history.points.row(i));
  }
  in.history = flatten_points(hist_ego) * kPosScale;

  const int n = map.vertex_count();
  if (n == 0) throw EmptyMap("predictor needs at least one map vertex");
  in.vertex_feats.resize(n, kVertexFeatures);
  int row = 0;
  for (const auto& e : map.elements) {
    for (const auto& v : e.vertices) {
      const Eigen::Vector2d mu = to_ego(v.mu);
      const Eigen::Matrix2d cov_ego =
          in.rot.transpose() * v.cov.matrix() * in.rot;
      const double s1 = std::sqrt(cov_ego(0, 0));
      const double s2 = std::sqrt(cov_ego(1, 1));
      const double rho = cov_ego(0, 1) / (s1 * s2);
      in.vertex_feats(row, 0) = mu.x() * kPosScale;
      in.vertex_feats(row, 1) = mu.y() * kPosScale;
      in.vertex_feats(row, 2) = s1 * kSigmaScale;
      in.vertex_feats(row, 3) = s2 * kSigmaScale;
      in.vertex_feats(row, 4) = rho;
      ++row;
    }
  }

  // Canonical row order: pooling is a mean, so vertex order carries no
  // meaning. Sorting here makes the whole encode path bitwise independent of
  // how the map listed its vertices.
  std::vector<long> idx(n);
  std::iota(idx.begin(), idx.end(), 0L);
  std::sort(idx.begin(), idx.end(), [&](long a, long b) {
    for (int c = 0; c < kVertexFeatures; ++c) {
      if (in.vertex_feats(a, c) != in.vertex_feats(b, c)) {
        return in.vertex_feats(a, c) < in.vertex_feats(b, c);
      }
    }
    return false;
  });
  Eigen::MatrixXd sorted(n, kVertexFeatures);
  for (int i = 0; i < n; ++i) sorted.row(i) = in.vertex_feats.row(idx[i]);
  in.vertex_feats = std::move(sorted);

  // Constant-velocity extrapolation from the last history segment.
  const Eigen::Vector2d v_ego =
      (hist_ego.row(last) - hist_ego.row(last - 1)) / scene.dt;
  Eigen::MatrixX2d cv(kHorizonSteps, 2);
  for (int k = 1; k <= kHorizonSteps; ++k) {
    cv.row(k - 1) = hist_ego.row(last) + (v_ego * scene.dt * k).transpose();
  }
  in.cv = flatten_points(cv);

  if (scene.future_gt.points.rows() == kHorizonSteps) {
    Eigen::MatrixX2d gt_ego(kHorizonSteps, 2);
    for (long i = 0; i < gt_ego.rows(); ++i) {
      gt_ego.row(i) = to_ego(scene.future_gt.points.row(i));
    }
    in.gt = flatten_points(gt_ego);
  }
  return in;
}

Model Model::init(Stream stream, const Config& config, int history_points) {
  if (stream == Stream::gated) {
    throw InvalidValue("predictors exist only for the base and unc streams");
  }
  Model m;
  m.stream = stream;
  // Component seeds do not depend on the stream, so both streams start from
  // identical weights wherever the shapes agree.
  m.vertex_encoder =
      nn::Mlp::make("vertex_enc", stream_input_width(stream),
                    config.vertex_widths, Rng::mix(config.seed, 0xA11CE),
                    false, config.dropout);
  m.history_encoder =
      nn::Mlp::make("history_enc", 2 * history_points, config.history_widths,
                    Rng::mix(config.seed, 0xB0B), false, config.dropout);
  const int joint = config.vertex_widths.back() + config.history_widths.back();
  m.trunk = nn::Mlp::make("trunk", joint, config.trunk_widths,
                          Rng::mix(config.seed, 0xC0DE), false, config.dropout);
  Rng head_rng(Rng::mix(config.seed, 0x6EAD5));
  for (int k = 0; k < kNumCandidates; ++k) {
    m.heads.push_back(nn::DenseLayer::make("head" + std::to_string(k),
                                           config.trunk_widths.back(),
                                           2 * kHorizonSteps, head_rng,
                                           /*zero_init=*/true));
  }
  return m;
}

namespace {

struct BatchForward {
  diff::Var h;                      // B x trunk width, post-activation
  std::vector<diff::Var> positions; // per head, B x (2 * horizon), ego meters
};

BatchForward batch_forward(Model& model, diff::Tape& tape,
                           const Eigen::MatrixXd& vertex_rows,
                           const std::vector<int>& vertex_counts,
                           const Eigen::MatrixXd& histories,
                           const Eigen::MatrixXd& cv, bool training, Rng* rng) {
  const int in_width = stream_input_width(model.stream);
  diff::Var feats = tape.constant(vertex_rows.leftCols(in_width));
  diff::Var pooled = tape.segment_mean(
      model.vertex_encoder.forward(tape, feats, training, rng), vertex_counts);
  diff::Var hist =
      model.history_encoder.forward(tape, tape.constant(histories), training, rng);
  diff::Var joint = tape.hcat(hist, pooled);
  diff::Var h = tape.relu(model.trunk.forward(tape, joint, training, rng));
  if (training && model.trunk.dropout_rate > 0.0) {
    h = tape.dropout(h, model.trunk.dropout_rate, *rng);
  }

  BatchForward out;
  out.h = h;
  diff::Var cv_var = tape.constant(cv);
  for (auto& head : model.heads) {
    diff::Var offsets =
        tape.add_rowvec(tape.matmul(h, tape.leaf(head.w)), tape.leaf(head.b));
    out.positions.push_back(tape.add(offsets, cv_var));
  }
  return out;
}

}  // namespace

StreamOutput Model::forward(const SceneInputs& inputs) {
  return forward_batch({inputs})[0];
}

std::vector<StreamOutput> Model::forward_batch(
    const std::vector<SceneInputs>& inputs) {
  std::vector<StreamOutput> outputs(inputs.size());
  constexpr size_t kChunk = 128;
  for (size_t start = 0; start < inputs.size(); start += kChunk) {
    const size_t count = std::min(kChunk, inputs.size() - start);

    long rows = 0;
    for (size_t i = 0; i < count; ++i) {
      rows += inputs[start + i].vertex_feats.rows();
    }
    Eigen::MatrixXd vertex_rows(rows, kVertexFeatures);
    std::vector<int> counts;
    Eigen::MatrixXd histories(count, inputs[start].history.cols());
    Eigen::MatrixXd cv(count, 2 * kHorizonSteps);
    long at = 0;
    for (size_t i = 0; i < count; ++i) {
      const SceneInputs& in = inputs[start + i];
      vertex_rows.middleRows(at, in.vertex_feats.rows()) = in.vertex_feats;
      counts.push_back(static_cast<int>(in.vertex_feats.rows()));
      at += in.vertex_feats.rows();
      histories.row(i) = in.history;
      cv.row(i) = in.cv;
    }

    diff::Tape tape;
    const BatchForward fwd = batch_forward(*this, tape, vertex_rows, counts,
                                           histories, cv, false, nullptr);
    const Eigen::MatrixXd padded =
        tape.value(tape.pad_cols(fwd.h, kEmbeddingWidth));
    std::vector<const Eigen::MatrixXd*> positions;
    for (const diff::Var& pos : fwd.positions) {
      positions.push_back(&tape.value(pos));
    }

    for (size_t i = 0; i < count; ++i) {
      const SceneInputs& in = inputs[start + i];
      StreamOutput& out = outputs[start + i];
      out.candidates.tag = stream;
      for (const Eigen::MatrixXd* flat : positions) {
        Eigen::MatrixX2d world(kHorizonSteps, 2);
        for (int k = 0; k < kHorizonSteps; ++k) {
          const Eigen::Vector2d ego((*flat)(i, 2 * k), (*flat)(i, 2 * k + 1));
          world.row(k) = (in.origin + in.rot * ego).transpose();
        }
        out.candidates.trajectories.push_back(std::move(world));
      }
      out.embedding = padded.row(i);
    }
  }
  return outputs;
}

std::vector<diff::Parameter*> Model::parameters() {
  std::vector<diff::Parameter*> out;
  vertex_encoder.collect(out);
  history_encoder.collect(out);
  trunk.collect(out);
  for (auto& head : heads) {
    out.push_back(&head.w);
    out.push_back(&head.b);
  }
  return out;
}

long Model::param_count() {
  long n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

void Model::save(const std::filesystem::path& path, std::uint64_t seed) {
  nlohmann::json meta;
  meta["model"] = "predictor";
  meta["stream"] = to_string(stream);
  meta["seed"] = seed;
  meta["history_points"] =
      static_cast<int>(history_encoder.layers[0].w.value.rows() / 2);
  const auto widths_of = [](const nn::Mlp& mlp) {
    std::vector<int> w;
    for (const auto& layer : mlp.layers) {
      w.push_back(static_cast<int>(layer.w.value.cols()));
    }
    return w;
  };
  meta["vertex_widths"] = widths_of(vertex_encoder);
  meta["history_widths"] = widths_of(history_encoder);
  meta["trunk_widths"] = widths_of(trunk);
  meta["dropout"] = trunk.dropout_rate;
  ckpt::save(path, meta, ckpt::snapshot(parameters()));
}

Model Model::load(const std::filesystem::path& path) {
  const ckpt::Checkpoint c = ckpt::load(path);
  if (c.meta.at("model") != "predictor") {
    throw IoFailure("not a predictor checkpoint: " + path.string());
  }
  Config config;
  config.vertex_widths = c.meta.at("vertex_widths").get<std::vector<int>>();
  config.history_widths = c.meta.at("history_widths").get<std::vector<int>>();
  config.trunk_widths = c.meta.at("trunk_widths").get<std::vector<int>>();
  config.dropout = c.meta.at("dropout").get<double>();
  const Stream stream =
      c.meta.at("stream") == "base" ? Stream::base : Stream::unc;
  Model m = init(stream, config, c.meta.at("history_points").get<int>());
  auto params = m.parameters();
  ckpt::restore(c, params);
  return m;
}

namespace {

struct FlatBatch {
  Eigen::MatrixXd vertex_rows;
  std::vector<int> vertex_counts;
  Eigen::MatrixXd histories;
  Eigen::MatrixXd cv;
  Eigen::MatrixXd gt;
};

FlatBatch gather(const std::vector<SceneInputs>& inputs,
                 const std::vector<int>& indices) {
  FlatBatch b;
  long rows = 0;
  for (int i : indices) rows += inputs[i].vertex_feats.rows();
  const long hist_w = inputs[indices[0]].history.cols();
  b.vertex_rows.resize(rows, kVertexFeatures);
  b.histories.resize(indices.size(), hist_w);
  b.cv.resize(indices.size(), 2 * kHorizonSteps);
  b.gt.resize(indices.size(), 2 * kHorizonSteps);
  long at = 0;
  for (size_t row = 0; row < indices.size(); ++row) {
    const SceneInputs& in = inputs[indices[row]];
    b.vertex_rows.middleRows(at, in.vertex_feats.rows()) = in.vertex_feats;
    b.vertex_counts.push_back(static_cast<int>(in.vertex_feats.rows()));
    at += in.vertex_feats.rows();
    b.histories.row(row) = in.history;
    b.cv.row(row) = in.cv;
    b.gt.row(row) = in.gt;
  }
  return b;
}

// Winner-take-all loss over one gathered batch; scalar node on the tape.
diff::Var wta_loss(Model& model, diff::Tape& tape, const FlatBatch& batch,
                   bool training, Rng* rng) {
  const BatchForward fwd =
      batch_forward(model, tape, batch.vertex_rows, batch.vertex_counts,
                    batch.histories, batch.cv, training, rng);
  diff::Var gt = tape.constant(batch.gt);
  diff::Var ades;
  for (int k = 0; k < kNumCandidates; ++k) {
    diff::Var ade = tape.mean_l2_rows(fwd.positions[k], gt);
    ades = k == 0 ? ade : tape.hcat(ades, ade);
  }
  return tape.mean_all(tape.row_min(ades));
}

}  // namespace

TrainResult train(Model& model, const std::vector<Scene>& train_scenes,
                  const std::vector<Scene>& val_scenes,
                  const std::vector<PolylineMap>& train_maps,
                  const std::vector<PolylineMap>& val_maps,
                  const Config& config) {
  if (train_scenes.empty() || val_scenes.empty()) {
    throw EmptyInput("predictor training needs non-empty splits");
  }
  if (train_maps.size() != train_scenes.size() ||
      val_maps.size() != val_scenes.size()) {
    throw ShapeMismatch("one inferred map per scene required");
  }

  std::vector<SceneInputs> train_inputs(train_scenes.size());
  std::vector<SceneInputs> val_inputs(val_scenes.size());
  for (size_t i = 0; i < train_scenes.size(); ++i) {
    train_inputs[i] = make_inputs(train_scenes[i], train_maps[i]);
  }
  for (size_t i = 0; i < val_scenes.size(); ++i) {
    val_inputs[i] = make_inputs(val_scenes[i], val_maps[i]);
  }

  auto params = model.parameters();
  nn::AdamConfig adam_config;
  adam_config.lr = config.lr;
  adam_config.clip_norm = config.clip_norm;
  nn::Adam adam(params, adam_config);
  Rng dropout_rng(Rng::mix(config.seed, 0xD120));

  const auto eval_split = [&](std::vector<SceneInputs>& inputs) {
    std::vector<int> all(inputs.size());
    std::iota(all.begin(), all.end(), 0);
    const FlatBatch batch = gather(inputs, all);
    diff::Tape tape;
    return tape.scalar(wta_loss(model, tape, batch, false, nullptr));
  };

  TrainResult result;
  std::vector<ckpt::TensorEntry> best;
  const int n = static_cast<int>(train_scenes.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(Rng::mix(config.seed, 0x9000 + epoch));
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
    }
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += config.batch_scenes) {
      const int count = std::min(config.batch_scenes, n - start);
      const std::vector<int> idx(order.begin() + start,
                                 order.begin() + start + count);
      const FlatBatch batch = gather(train_inputs, idx);
      adam.zero_grad();
      diff::Tape tape;
      diff::Var loss = wta_loss(model, tape, batch, true, &dropout_rng);
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) {
        throw NonFiniteLoss("non-finite predictor loss in epoch " +
                            std::to_string(epoch) + ", batch " +
                            std::to_string(batches));
      }
      tape.backward(loss);
      adam.step();
      epoch_loss += value;
      ++batches;
    }
    result.train_curve.push_back(epoch_loss / batches);
    const double val = eval_split(val_inputs);
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

}  // namespace mapgate::predictor
