// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "mapgate/nn.hpp"
#include "mapgate/scene.hpp"
#include "mapgate/uncertainty.hpp"

namespace mapgate::mapper {

// Context feature row per vertex:
//   [dist_to_ego * kDistScale, occlusion,
//    one-hot(divider, boundary, crossing), tangent_x, tangent_y]
inline constexpr int kContextWidth = 7;
inline constexpr double kDistScale = 0.05;

struct Config {
  std::vector<int> hidden{64, 64};
  unc::LossKind loss_kind = unc::LossKind::gaussian_cov;
  double lambda_reg = 1e-3;
  double loss_weight = 0.03;
  double lr = 1.5e-4;
  int epochs = 120;
  int batch_scenes = 32;
  double clip_norm = 3.0;
  std::uint64_t seed = 7;
};

Eigen::MatrixXd context_features(const Scene& scene);
Eigen::MatrixX2d noisy_positions(const Scene& scene);

// Per-vertex uncertainty head. The network maps context features to
// (dx, dy, log_sigma1, log_sigma2, rho_raw); the mean is the noisy position
// plus the predicted correction, so a zero-initialized head starts at the
// observation with unit sigmas.
struct Model {
  nn::Mlp net;
  unc::LossKind loss_kind = unc::LossKind::gaussian_cov;

  static Model init(const Config& config);

  // Raw head outputs for a block of context rows (evaluation mode).
  Eigen::MatrixXd head(const Eigen::MatrixXd& context);

  // Full (mu, log_s1, log_s2, rho_raw) rows for a scene.
  Eigen::MatrixXd vertex_params(const Scene& scene);

  // UncertainVertex map mirroring the scene's element structure.
  PolylineMap infer(const Scene& scene);

  std::vector<diff::Parameter*> parameters();
  void save(const std::filesystem::path& path, std::uint64_t seed);
  static Model load(const std::filesystem::path& path);
};

struct TrainResult {
  std::vector<double> train_curve;  // mean per-vertex NLL per epoch
  std::vector<double> val_curve;
  int best_epoch = -1;
  double best_val = 0.0;
};

// Deterministic given config.seed. Tracks the best validation NLL and leaves
// the model at that snapshot. Throws NonFiniteLoss with the offending batch
// index on numerical failure.
TrainResult train(Model& model, const std::vector<Scene>& train_scenes,
                  const std::vector<Scene>& val_scenes, const Config& config);

// Mean per-vertex NLL of the model on a split (no regularizer).
double mean_nll(Model& model, const std::vector<Scene>& scenes);

}  // namespace mapgate::mapper
