// SPDX-License-Identifier: Apache-2.0
#include "mapgate/nn.hpp"

#include <cmath>

namespace mapgate::nn {

Eigen::MatrixXd he_uniform(long rows, long cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows));
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

DenseLayer DenseLayer::make(const std::string& name, int in, int out, Rng& rng,
                            bool zero_init) {
  DenseLayer layer;
  layer.w = Parameter(name + ".w", zero_init ? Eigen::MatrixXd::Zero(in, out)
                                             : he_uniform(in, out, rng));
  layer.b = Parameter(name + ".b", Eigen::MatrixXd::Zero(1, out));
  return layer;
}

Mlp Mlp::make(const std::string& name, int in_width,
              const std::vector<int>& widths, std::uint64_t seed,
              bool zero_init_last, double dropout) {
  if (widths.empty()) throw InvalidValue("mlp needs at least one layer");
  for (int w : widths) {
    if (w <= 0) throw InvalidValue("mlp widths must be positive");
  }
  Rng rng(seed);
  Mlp mlp;
  mlp.dropout_rate = dropout;
  int in = in_width;
  for (size_t i = 0; i < widths.size(); ++i) {
    const bool zero = zero_init_last && i + 1 == widths.size();
    mlp.layers.push_back(
        DenseLayer::make(name + "." + std::to_string(i), in, widths[i], rng, zero));
    in = widths[i];
  }
  return mlp;
}

Var Mlp::forward(Tape& tape, Var x, bool training, Rng* rng) {
  Var h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    auto& layer = layers[i];
    h = tape.add_rowvec(tape.matmul(h, tape.leaf(layer.w)), tape.leaf(layer.b));
    if (i + 1 < layers.size()) {
      h = tape.relu(h);
      if (training && dropout_rate > 0.0) {
        if (rng == nullptr) throw InvalidValue("training dropout needs an rng");
        h = tape.dropout(h, dropout_rate, *rng);
      }
    }
  }
  return h;
}

void Mlp::collect(std::vector<Parameter*>& out) {
  for (auto& layer : layers) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
  }
}

long Mlp::param_count() const {
  long n = 0;
  for (const auto& layer : layers) n += layer.w.size() + layer.b.size();
  return n;
}

double global_grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

double clip_global_norm(std::span<Parameter* const> params, double max_norm) {
  if (max_norm <= 0.0) return 1.0;
  const double norm = global_grad_norm(params);
  if (norm <= max_norm) return 1.0;
  const double scale = max_norm / norm;
  for (Parameter* p : params) p->grad *= scale;
  return scale;
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

double Adam::step() {
  const double pre_clip = global_grad_norm(params_);
  clip_global_norm(params_, config_.clip_norm);
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
    v_[i] = config_.beta2 * v_[i] +
            (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    const Eigen::MatrixXd m_hat = m_[i] / bc1;
    const Eigen::MatrixXd v_hat = v_[i] / bc2;
    p.value -=
        config_.lr *
        m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + config_.eps).matrix());
  }
  return pre_clip;
}

}  // namespace mapgate::nn
