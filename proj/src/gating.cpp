// SPDX-License-Identifier: Apache-2.0
#include "mapgate/gating.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mapgate/checkpoint.hpp"

namespace mapgate::gating {

namespace {
const std::vector<int> kStackWidths{512, 256, 128, 64, 32, 2};
constexpr int kProjIn = 2 * predictor::kEmbeddingWidth;
constexpr int kProjOut = 512;
}  // namespace

const char* to_string(Fusion f) {
  return f == Fusion::convex ? "convex" : "select";
}

Fusion fusion_from_string(const std::string& s) {
  if (s == "convex") return Fusion::convex;
  if (s == "select") return Fusion::select;
  throw InvalidValue("unknown fusion mode: " + s);
}

const char* to_string(TargetMode m) {
  return m == TargetMode::hard ? "hard" : "softmax";
}

TargetMode target_mode_from_string(const std::string& s) {
  if (s == "hard") return TargetMode::hard;
  if (s == "softmax") return TargetMode::softmax;
  throw InvalidValue("unknown target mode: " + s);
}

Model Model::init(const Config& config) {
  if (!(config.temperature > 0.0)) {
    throw InvalidTemperature("gate temperature must be positive");
  }
  Model m;
  m.temperature = config.temperature;
  Rng rng(Rng::mix(config.seed, 0x6A7E));
  m.proj = nn::DenseLayer::make("gate_proj", kProjIn, kProjOut, rng, false);
  m.stack = nn::Mlp::make("gate", kProjOut, kStackWidths,
                          Rng::mix(config.seed, 0x6A7E + 1),
                          /*zero_init_last=*/true, config.dropout);
  return m;
}

namespace {

diff::Var gate_logits(Model& model, diff::Tape& tape, diff::Var input,
                      bool training, Rng* rng) {
  diff::Var projected = tape.relu(tape.add_rowvec(
      tape.matmul(input, tape.leaf(model.proj.w)), tape.leaf(model.proj.b)));
  if (training && model.stack.dropout_rate > 0.0) {
    projected = tape.dropout(projected, model.stack.dropout_rate, *rng);
  }
  return model.stack.forward(tape, projected, training, rng);
}

}  // namespace

GateDecision Model::forward(const Eigen::RowVectorXd& emb_base,
                            const Eigen::RowVectorXd& emb_unc) {
  if (emb_base.cols() != predictor::kEmbeddingWidth ||
      emb_unc.cols() != predictor::kEmbeddingWidth) {
    throw ShapeMismatch("gate expects embeddings of width " +
                        std::to_string(predictor::kEmbeddingWidth));
  }
  Eigen::MatrixXd input(1, kProjIn);
  input << emb_base, emb_unc;

  diff::Tape tape;
  diff::Var logits = gate_logits(*this, tape, tape.constant(input), false, nullptr);
  diff::Var weights = tape.softmax_rows(logits, temperature);

  GateDecision d;
  d.logits = {tape.value(logits)(0, 0), tape.value(logits)(0, 1)};
  d.w_base = tape.value(weights)(0, 0);
  d.w_unc = tape.value(weights)(0, 1);
  return d;
}

std::vector<diff::Parameter*> Model::parameters() {
  std::vector<diff::Parameter*> out{&proj.w, &proj.b};
  stack.collect(out);
  return out;
}

void Model::save(const std::filesystem::path& path, std::uint64_t seed) {
  nlohmann::json meta;
  meta["model"] = "gate";
  meta["temperature"] = temperature;
  meta["dropout"] = stack.dropout_rate;
  meta["seed"] = seed;
  ckpt::save(path, meta, ckpt::snapshot(parameters()));
}

Model Model::load(const std::filesystem::path& path) {
  const ckpt::Checkpoint c = ckpt::load(path);
  if (c.meta.at("model") != "gate") {
    throw IoFailure("not a gate checkpoint: " + path.string());
  }
  Config config;
  config.temperature = c.meta.at("temperature").get<double>();
  config.dropout = c.meta.at("dropout").get<double>();
  Model m = init(config);
  auto params = m.parameters();
  ckpt::restore(c, params);
  return m;
}

std::pair<double, double> make_target_weights(double err_base, double err_unc,
                                              double target_temperature) {
  if (!(target_temperature > 0.0)) {
    throw InvalidTemperature("target temperature must be positive");
  }
  if (err_base < 0.0 || err_unc < 0.0) {
    throw InvalidValue("stream errors must be non-negative");
  }
  if (err_base == err_unc) return {0.5, 0.5};
  const double a = -err_base / target_temperature;
  const double b = -err_unc / target_temperature;
  const double m = std::max(a, b);
  const double ea = std::exp(a - m);
  const double eb = std::exp(b - m);
  return {ea / (ea + eb), eb / (ea + eb)};
}

CandidateSet fuse_trajectories(const CandidateSet& base, const CandidateSet& unc,
                               const GateDecision& decision, Fusion fusion) {
  if (base.trajectories.size() != unc.trajectories.size()) {
    throw ShapeMismatch("candidate sets differ in size");
  }
  CandidateSet fused;
  fused.tag = Stream::gated;
  if (fusion == Fusion::select) {
    fused.trajectories = decision.w_base >= decision.w_unc ? base.trajectories
                                                           : unc.trajectories;
    return fused;
  }
  for (size_t k = 0; k < base.trajectories.size(); ++k) {
    if (base.trajectories[k].rows() != unc.trajectories[k].rows()) {
      throw ShapeMismatch("candidate horizons differ");
    }
    fused.trajectories.push_back(decision.w_base * base.trajectories[k] +
                                 decision.w_unc * unc.trajectories[k]);
  }
  return fused;
}

TrainResult train(Model& model, const Eigen::MatrixXd& train_inputs,
                  const Eigen::MatrixXd& train_targets,
                  const Eigen::MatrixXd& val_inputs,
                  const Eigen::MatrixXd& val_targets, const Config& config) {
  if (train_inputs.rows() == 0 || val_inputs.rows() == 0) {
    throw EmptyInput("gate training needs non-empty splits");
  }
  if (train_inputs.cols() != kProjIn || train_targets.cols() != 2 ||
      train_inputs.rows() != train_targets.rows()) {
    throw ShapeMismatch("gate training data has the wrong shape");
  }

  auto params = model.parameters();
  nn::AdamConfig adam_config;
  adam_config.lr = config.lr;
  adam_config.clip_norm = config.clip_norm;
  nn::Adam adam(params, adam_config);
  Rng dropout_rng(Rng::mix(config.seed, 0xD6A7E));

  const auto eval_split = [&](const Eigen::MatrixXd& x, const Eigen::MatrixXd& t) {
    diff::Tape tape;
    diff::Var logits = gate_logits(model, tape, tape.constant(x), false, nullptr);
    diff::Var w = tape.softmax_rows(logits, model.temperature);
    return tape.scalar(tape.mse(w, tape.constant(t)));
  };

  TrainResult result;
  std::vector<ckpt::TensorEntry> best;
  const int n = static_cast<int>(train_inputs.rows());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(Rng::mix(config.seed, 0x6000 + epoch));
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
    }
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += config.batch) {
      const int count = std::min(config.batch, n - start);
      Eigen::MatrixXd x(count, train_inputs.cols());
      Eigen::MatrixXd t(count, 2);
      for (int i = 0; i < count; ++i) {
        x.row(i) = train_inputs.row(order[start + i]);
        t.row(i) = train_targets.row(order[start + i]);
      }
      adam.zero_grad();
      diff::Tape tape;
      diff::Var logits = gate_logits(model, tape, tape.constant(x), true,
                                     &dropout_rng);
      diff::Var w = tape.softmax_rows(logits, model.temperature);
      diff::Var loss = tape.mse(w, tape.constant(t));
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) {
        throw NonFiniteLoss("non-finite gate loss in epoch " +
                            std::to_string(epoch));
      }
      tape.backward(loss);
      adam.step();
      epoch_loss += value;
      ++batches;
    }
    result.train_curve.push_back(epoch_loss / batches);
    const double val = eval_split(val_inputs, val_targets);
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

}  // namespace mapgate::gating
