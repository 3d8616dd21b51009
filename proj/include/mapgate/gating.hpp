// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "mapgate/nn.hpp"
#include "mapgate/predictor.hpp"
#include "mapgate/types.hpp"

namespace mapgate::gating {

enum class Fusion { convex, select };
const char* to_string(Fusion f);
Fusion fusion_from_string(const std::string& s);

// How training targets are derived from the two streams' realized errors:
// hard picks the winning stream outright (ties at 0.5); softmax smooths by
// make_target_weights at target_temperature.
enum class TargetMode { hard, softmax };
const char* to_string(TargetMode m);
TargetMode target_mode_from_string(const std::string& s);

struct Config {
  double temperature = 0.6;         // softmax temperature at the gate output
  TargetMode target_mode = TargetMode::hard;
  double target_temperature = 0.1;  // sharpness of softmax-mode targets
  double dropout = 0.1;
  double lr = 1e-3;
  int epochs = 80;
  int batch = 32;
  double clip_norm = 3.0;
  // Hard per-scene selection; the convex blend is available as a config
  // alternative but mixes candidates across streams whose head indices do not
  // correspond, which measurably hurts accuracy.
  Fusion fusion = Fusion::select;
  std::uint64_t seed = 7;
};

// Projection from the concatenated stream embeddings down to the gate MLP
// stack, whose layer widths follow the fixed 512/256/128/64/32/2 schedule.
struct Model {
  nn::DenseLayer proj;  // 1024 -> 512
  nn::Mlp stack;        // 512 -> 512, 256, 128, 64, 32, 2 (zero-init last)
  double temperature = 0.6;

  static Model init(const Config& config);

  GateDecision forward(const Eigen::RowVectorXd& emb_base,
                       const Eigen::RowVectorXd& emb_unc);

  std::vector<diff::Parameter*> parameters();
  void save(const std::filesystem::path& path, std::uint64_t seed);
  static Model load(const std::filesystem::path& path);
};

// Softmax of negative per-stream errors: lower error, larger weight; equal
// errors give exactly (0.5, 0.5).
std::pair<double, double> make_target_weights(double err_base, double err_unc,
                                              double target_temperature);

// Candidate-wise combination of the two streams, paired by head index.
CandidateSet fuse_trajectories(const CandidateSet& base, const CandidateSet& unc,
                               const GateDecision& decision,
                               Fusion fusion = Fusion::convex);

struct TrainResult {
  std::vector<double> train_curve;  // MSE per epoch
  std::vector<double> val_curve;
  int best_epoch = -1;
  double best_val = 0.0;
};

// Trains the gate on precomputed stream embeddings (rows of
// [emb_base | emb_unc]) against target weight rows via MSE on the
// temperature softmax output.
TrainResult train(Model& model, const Eigen::MatrixXd& train_inputs,
                  const Eigen::MatrixXd& train_targets,
                  const Eigen::MatrixXd& val_inputs,
                  const Eigen::MatrixXd& val_targets, const Config& config);

}  // namespace mapgate::gating
