// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mapgate/types.hpp"

namespace mapgate::unc {

enum class LossKind { gaussian_cov, gaussian_indep, laplace_indep };
const char* to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

// Determinant floor applied before log/inverse so a collapsing covariance
// cannot produce non-finite loss terms.
inline constexpr double kDetFloor = 1e-12;

// Column layout of per-vertex parameter rows used by the batched losses and
// by the mapper head.
enum ParamCol : int {
  kMuX = 0,
  kMuY = 1,
  kLogSigma1 = 2,
  kLogSigma2 = 3,
  kRhoRaw = 4,
  kParamCols = 5,
};

struct BatchLoss {
  double loss = 0.0;        // summed over vertices, regularizer included
  Eigen::MatrixXd grad;     // N x 5, d loss / d (mu_x, mu_y, log_s1, log_s2, rho_raw)
};

// Negative log-likelihood of `observed` under per-vertex distributions whose
// parameters are the rows of `params` (see ParamCol). The regularizer is
// lambda_reg * sum_i (log_s1^2 + log_s2^2 + rho_raw^2) for the Gaussian
// variants and lambda_reg * sum_i (log_s1^2 + log_s2^2) for the Laplace one.
// gaussian_indep and laplace_indep ignore rho_raw entirely (treated as 0).
// Throws NonFiniteLoss if any term fails to evaluate finitely.
BatchLoss nll(LossKind kind, const Eigen::MatrixXd& params,
              const Eigen::MatrixX2d& observed, double lambda_reg);

// PolylineMap front-ends; `observed` holds one target point per vertex in
// element order.
BatchLoss gaussian_nll(const PolylineMap& map,
                       const std::vector<Eigen::Vector2d>& observed,
                       double lambda_reg = 0.0);
BatchLoss indep_gaussian_nll(const PolylineMap& map,
                             const std::vector<Eigen::Vector2d>& observed,
                             double lambda_reg = 0.0);
BatchLoss indep_laplace_nll(const PolylineMap& map,
                            const std::vector<Eigen::Vector2d>& observed,
                            double lambda_reg = 0.0);

// Bivariate normal density at `point`, 1/m^2.
double gaussian_pdf(const UncertainVertex& vertex, const Eigen::Vector2d& point);

// Deterministic draw from the vertex distribution via the Cholesky factor of
// its covariance.
Eigen::Vector2d sample_vertex(const UncertainVertex& vertex, std::uint64_t seed);

// Rows of (mu_x, mu_y, log_s1, log_s2, rho_raw) for every vertex of the map.
Eigen::MatrixXd params_from_map(const PolylineMap& map);

}  // namespace mapgate::unc
