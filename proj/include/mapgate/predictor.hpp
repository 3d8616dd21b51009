// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "mapgate/nn.hpp"
#include "mapgate/scene.hpp"
#include "mapgate/types.hpp"

namespace mapgate::predictor {

inline constexpr int kEmbeddingWidth = 512;
inline constexpr int kHorizonSteps = 6;
// Fixed feature pre-scaling ahead of the encoders; decoded offsets stay in
// meters. Sigma features span centimeters to several meters, so they get the
// same treatment as positions.
inline constexpr double kPosScale = 0.1;
inline constexpr double kSigmaScale = 0.25;

struct Config {
  std::vector<int> vertex_widths{64, 64};
  std::vector<int> history_widths{64, 64};
  std::vector<int> trunk_widths{128, 128};
  double dropout = 0.1;
  double lr = 5e-4;
  int epochs = 150;
  int batch_scenes = 32;
  double clip_norm = 3.0;
  std::uint64_t seed = 7;
};

// Scene rendered into the ego frame at prediction time: origin at the last
// history point, x axis along the final history heading.
struct SceneInputs {
  Eigen::RowVectorXd history;      // 1 x (2 * history points), scaled
  Eigen::MatrixXd vertex_feats;    // N x 5: scaled mu, sigma1, sigma2, rho
  Eigen::RowVectorXd cv;           // 1 x (2 * horizon), meters (ego frame)
  Eigen::RowVectorXd gt;           // 1 x (2 * horizon), meters (ego frame)
  Eigen::Matrix2d rot;             // ego -> world rotation
  Eigen::Vector2d origin;          // world position of the ego frame origin
};

SceneInputs make_inputs(const Scene& scene, const PolylineMap& map);

struct StreamOutput {
  CandidateSet candidates;         // world frame
  Eigen::RowVectorXd embedding;    // width kEmbeddingWidth, zero padded
};

// Dual-stream trajectory decoder. Both streams share the architecture; only
// the vertex-encoder input width differs (2 for base, 5 for unc). Candidate
// heads are zero-initialized, so an untrained model decodes the
// constant-velocity extrapolation.
struct Model {
  Stream stream = Stream::base;
  nn::Mlp vertex_encoder;
  nn::Mlp history_encoder;
  nn::Mlp trunk;
  std::vector<nn::DenseLayer> heads;

  static Model init(Stream stream, const Config& config, int history_points);

  StreamOutput forward(const SceneInputs& inputs);
  // One batched pass over many scenes; identical results to forward() per
  // scene, far fewer tapes.
  std::vector<StreamOutput> forward_batch(const std::vector<SceneInputs>& inputs);

  std::vector<diff::Parameter*> parameters();
  long param_count();
  void save(const std::filesystem::path& path, std::uint64_t seed);
  static Model load(const std::filesystem::path& path);
};

struct TrainResult {
  std::vector<double> train_curve;  // winner-take-all ADE per epoch
  std::vector<double> val_curve;
  int best_epoch = -1;
  double best_val = 0.0;
};

// Trains with the winner-take-all regression loss: per scene, the minimum
// over candidates of the mean waypoint distance to the ground truth.
TrainResult train(Model& model, const std::vector<Scene>& train_scenes,
                  const std::vector<Scene>& val_scenes,
                  const std::vector<PolylineMap>& train_maps,
                  const std::vector<PolylineMap>& val_maps, const Config& config);

}  // namespace mapgate::predictor
