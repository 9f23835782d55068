#pragma once

#include "hierfdr/dataset.hpp"

#include <optional>

namespace hierfdr {

/// zeta(i, j) is the estimated influence of observation i on coordinate j;
/// tau0(i) is the censoring compensation factor at y_i.
struct InfluenceTable {
  MatrixXd zeta;
  VectorXd tau0;
};

/// Influence values from per-observation scores scores(i, j) = phi_ij * residual_i.
/// `sorted_y` only supplies the ordering (ties and strict inequalities are
/// evaluated on it), `status` the event indicators; both in time order.
InfluenceTable influence_from_scores(const VectorXd& sorted_y, const VectorXi& status, const MatrixXd& scores);

/// Scores phi_ij (response_i - phi_i^T theta) on the centered design.
InfluenceTable compute_influence(const VectorXd& sorted_y, const VectorXi& status, const MatrixXd& phi,
                                 const VectorXd& response, const VectorXd& theta_hat);

enum class CovarianceMode { DiagOnly, Full };

struct CovarianceEstimate {
  std::optional<MatrixXd> sigma;  // only in Full mode
  VectorXd lambda_diag;           // m_j^T Sigma m_j, empty when no M was supplied
};

/// Sample covariance (n - 1 divisor) of the zeta columns.
MatrixXd influence_covariance(const InfluenceTable& table);

/// Diagonal of M Sigma M^T without materialising Sigma.
VectorXd lambda_diagonal(const InfluenceTable& table, const MatrixXd& m_hat);

CovarianceEstimate covariance_from_influence(const InfluenceTable& table, CovarianceMode mode,
                                             const MatrixXd* m_hat = nullptr);

}  // namespace hierfdr
