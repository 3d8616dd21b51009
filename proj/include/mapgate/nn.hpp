// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "mapgate/autodiff.hpp"

namespace mapgate::nn {

using diff::Parameter;
using diff::Tape;
using diff::Var;

// He-style uniform init with fan-in scaling: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
Eigen::MatrixXd he_uniform(long rows, long cols, Rng& rng);

struct DenseLayer {
  Parameter w;  // in x out
  Parameter b;  // 1 x out
  static DenseLayer make(const std::string& name, int in, int out, Rng& rng,
                         bool zero_init);
};

// Plain fully connected stack: ReLU between layers, nothing after the last
// one. Dropout (inverted scaling) follows each hidden activation in training
// mode only, so inference needs no rescaling.
struct Mlp {
  std::vector<DenseLayer> layers;
  double dropout_rate = 0.0;

  // widths are the output sizes of each layer; the final layer is
  // zero-initialized when zero_init_last is set (residual-style heads).
  static Mlp make(const std::string& name, int in_width,
                  const std::vector<int>& widths, std::uint64_t seed,
                  bool zero_init_last = false, double dropout = 0.0);

  Var forward(Tape& tape, Var x, bool training = false, Rng* rng = nullptr);

  void collect(std::vector<Parameter*>& out);
  long param_count() const;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 3.0;  // <= 0 disables clipping
};

// Euclidean norm over every gradient entry of the group.
double global_grad_norm(std::span<Parameter* const> params);

// Scales all gradients so their global norm is at most max_norm; returns the
// scale that was applied (1.0 when already within bounds).
double clip_global_norm(std::span<Parameter* const> params, double max_norm);

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  void zero_grad();
  // Clips, then applies one update. Returns the pre-clip global grad norm.
  double step();
  long timestep() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
  long t_ = 0;
};

}  // namespace mapgate::nn
