// SPDX-License-Identifier: Apache-2.0
#include "mapgate/uncertainty.hpp"

#include <cmath>
#include <numbers>

#include "mapgate/rng.hpp"

namespace mapgate::unc {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
}

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::gaussian_cov: return "gaussian_cov";
    case LossKind::gaussian_indep: return "gaussian_indep";
    case LossKind::laplace_indep: return "laplace_indep";
  }
  return "gaussian_cov";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "gaussian_cov") return LossKind::gaussian_cov;
  if (s == "gaussian_indep") return LossKind::gaussian_indep;
  if (s == "laplace_indep") return LossKind::laplace_indep;
  throw InvalidValue("unknown loss kind: " + s);
}

namespace {

// Correlated-Gaussian NLL for one vertex. With u = dx/s1, w = dy/s2 and
// c = 1/(1 - rho^2):
//   L = log(2*pi) + log_s1 + log_s2 + 0.5*log(1 - rho^2)
//       + 0.5*c*(u^2 - 2*rho*u*w + w^2)
// which equals 0.5*log((2*pi)^2 |Sigma|) + 0.5 * Mahalanobis^2.
using VertexGrad = Eigen::Matrix<double, 1, kParamCols>;

void gaussian_vertex(double dx, double dy, double log_s1, double log_s2,
                     double rho_raw, bool use_rho, double& loss,
                     VertexGrad& grad) {
  const double s1 = std::exp(log_s1);
  const double s2 = std::exp(log_s2);
  const double rho = use_rho ? std::tanh(rho_raw) : 0.0;
  const double one_m_r2 = 1.0 - rho * rho;

  const double det = s1 * s1 * s2 * s2 * one_m_r2;
  const bool floored = det < kDetFloor;
  const double log_det = std::log(floored ? kDetFloor : det);

  const double u = dx / s1;
  const double w = dy / s2;
  const double c = 1.0 / one_m_r2;
  const double quad = c * (u * u - 2.0 * rho * u * w + w * w);

  loss = kLog2Pi + 0.5 * log_det + 0.5 * quad;

  // d(dx) terms; mu enters through dx = v_x - mu_x, so d/d mu = -d/d dx.
  const double d_dx = c * (u - rho * w) / s1;
  const double d_dy = c * (w - rho * u) / s2;
  grad(0, kMuX) = -d_dx;
  grad(0, kMuY) = -d_dy;

  // log-det contributes 1 to each log-scale unless the floor is active.
  const double det_term = floored ? 0.0 : 1.0;
  grad(0, kLogSigma1) = det_term - c * u * (u - rho * w);
  grad(0, kLogSigma2) = det_term - c * w * (w - rho * u);

  if (use_rho) {
    // d loss / d rho_raw collapses to rho*c*S - u*w - rho with
    // S = u^2 - 2*rho*u*w + w^2 (the tanh Jacobian cancels one factor of c).
    const double s_quad = u * u - 2.0 * rho * u * w + w * w;
    double d_rho_raw = rho * c * s_quad - u * w - rho;
    if (floored) {
      // Only the quadratic term survives when the determinant is clamped.
      const double d_quad_d_rho = 2.0 * c * (rho * c * s_quad - u * w);
      d_rho_raw = 0.5 * d_quad_d_rho * one_m_r2;
    }
    grad(0, kRhoRaw) = d_rho_raw;
  } else {
    grad(0, kRhoRaw) = 0.0;
  }
}

void laplace_vertex(double dx, double dy, double log_b1, double log_b2,
                    double& loss, VertexGrad& grad) {
  const double b1 = std::exp(log_b1);
  const double b2 = std::exp(log_b2);
  constexpr double kLog2 = 0.6931471805599453;
  loss = 2.0 * kLog2 + log_b1 + log_b2 + std::abs(dx) / b1 + std::abs(dy) / b2;

  const double sgn_x = (dx > 0.0) - (dx < 0.0);
  const double sgn_y = (dy > 0.0) - (dy < 0.0);
  grad(0, kMuX) = -sgn_x / b1;
  grad(0, kMuY) = -sgn_y / b2;
  grad(0, kLogSigma1) = 1.0 - std::abs(dx) / b1;
  grad(0, kLogSigma2) = 1.0 - std::abs(dy) / b2;
  grad(0, kRhoRaw) = 0.0;
}

}  // namespace

BatchLoss nll(LossKind kind, const Eigen::MatrixXd& params,
              const Eigen::MatrixX2d& observed, double lambda_reg) {
  if (params.cols() != kParamCols) {
    throw ShapeMismatch("parameter rows must have 5 columns");
  }
  if (params.rows() != observed.rows()) {
    throw ShapeMismatch("one observed point per vertex required");
  }
  if (!observed.allFinite() || !params.allFinite()) {
    throw InvalidValue("non-finite inputs to nll");
  }

  const int n = static_cast<int>(params.rows());
  BatchLoss out;
  out.grad = Eigen::MatrixXd::Zero(n, kParamCols);

  for (int i = 0; i < n; ++i) {
    const double dx = observed(i, 0) - params(i, kMuX);
    const double dy = observed(i, 1) - params(i, kMuY);
    double vertex_loss = 0.0;
    VertexGrad g = VertexGrad::Zero();
    switch (kind) {
      case LossKind::gaussian_cov:
        gaussian_vertex(dx, dy, params(i, kLogSigma1), params(i, kLogSigma2),
                        params(i, kRhoRaw), true, vertex_loss, g);
        break;
      case LossKind::gaussian_indep:
        gaussian_vertex(dx, dy, params(i, kLogSigma1), params(i, kLogSigma2),
                        0.0, false, vertex_loss, g);
        break;
      case LossKind::laplace_indep:
        laplace_vertex(dx, dy, params(i, kLogSigma1), params(i, kLogSigma2),
                       vertex_loss, g);
        break;
    }
    out.grad.row(i) = g;
    out.loss += vertex_loss;

    if (lambda_reg != 0.0) {
      const double ls1 = params(i, kLogSigma1);
      const double ls2 = params(i, kLogSigma2);
      out.loss += lambda_reg * (ls1 * ls1 + ls2 * ls2);
      out.grad(i, kLogSigma1) += 2.0 * lambda_reg * ls1;
      out.grad(i, kLogSigma2) += 2.0 * lambda_reg * ls2;
      if (kind == LossKind::gaussian_cov) {
        const double rr = params(i, kRhoRaw);
        out.loss += lambda_reg * rr * rr;
        out.grad(i, kRhoRaw) += 2.0 * lambda_reg * rr;
      }
    }
  }

  if (!std::isfinite(out.loss) || !out.grad.allFinite()) {
    throw NonFiniteLoss("nll produced a non-finite value");
  }
  return out;
}

Eigen::MatrixXd params_from_map(const PolylineMap& map) {
  const int n = map.vertex_count();
  Eigen::MatrixXd params(n, kParamCols);
  int row = 0;
  for (const auto& e : map.elements) {
    for (const auto& v : e.vertices) {
      params(row, kMuX) = v.mu.x();
      params(row, kMuY) = v.mu.y();
      params(row, kLogSigma1) = v.cov.log_sigma1;
      params(row, kLogSigma2) = v.cov.log_sigma2;
      params(row, kRhoRaw) = v.cov.rho_raw;
      ++row;
    }
  }
  return params;
}

namespace {
BatchLoss map_nll(LossKind kind, const PolylineMap& map,
                  const std::vector<Eigen::Vector2d>& observed,
                  double lambda_reg) {
  if (static_cast<int>(observed.size()) != map.vertex_count()) {
    throw ShapeMismatch("observed targets must match map vertex count");
  }
  Eigen::MatrixX2d obs(observed.size(), 2);
  for (size_t i = 0; i < observed.size(); ++i) obs.row(i) = observed[i];
  return nll(kind, params_from_map(map), obs, lambda_reg);
}
}  // namespace

BatchLoss gaussian_nll(const PolylineMap& map,
                       const std::vector<Eigen::Vector2d>& observed,
                       double lambda_reg) {
  return map_nll(LossKind::gaussian_cov, map, observed, lambda_reg);
}

BatchLoss indep_gaussian_nll(const PolylineMap& map,
                             const std::vector<Eigen::Vector2d>& observed,
                             double lambda_reg) {
  return map_nll(LossKind::gaussian_indep, map, observed, lambda_reg);
}

BatchLoss indep_laplace_nll(const PolylineMap& map,
                            const std::vector<Eigen::Vector2d>& observed,
                            double lambda_reg) {
  return map_nll(LossKind::laplace_indep, map, observed, lambda_reg);
}

double gaussian_pdf(const UncertainVertex& vertex, const Eigen::Vector2d& point) {
  const double s1 = vertex.cov.sigma1();
  const double s2 = vertex.cov.sigma2();
  const double rho = vertex.cov.rho();
  const double one_m_r2 = 1.0 - rho * rho;
  double det = s1 * s1 * s2 * s2 * one_m_r2;
  if (det < kDetFloor) det = kDetFloor;

  const double u = (point.x() - vertex.mu.x()) / s1;
  const double w = (point.y() - vertex.mu.y()) / s2;
  const double quad = (u * u - 2.0 * rho * u * w + w * w) / one_m_r2;
  return std::exp(-0.5 * quad) / (2.0 * std::numbers::pi * std::sqrt(det));
}

Eigen::Vector2d sample_vertex(const UncertainVertex& vertex, std::uint64_t seed) {
  Rng rng(seed);
  const double s1 = vertex.cov.sigma1();
  const double s2 = vertex.cov.sigma2();
  const double rho = vertex.cov.rho();
  // Lower Cholesky factor of the covariance.
  const double l11 = s1;
  const double l21 = rho * s2;
  const double l22 = s2 * std::sqrt(1.0 - rho * rho);
  const double z1 = rng.normal();
  const double z2 = rng.normal();
  return vertex.mu + Eigen::Vector2d(l11 * z1, l21 * z1 + l22 * z2);
}

}  // namespace mapgate::unc
