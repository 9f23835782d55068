#include "hierfdr/influence_cov.hpp"

#include "hierfdr/error.hpp"

#include <cmath>

namespace hierfdr {

InfluenceTable influence_from_scores(const VectorXd& sorted_y, const VectorXi& status, const MatrixXd& scores) {
  const Index n = sorted_y.size();
  if (status.size() != n || scores.rows() != n) fail(ErrorCode::DimensionMismatch, "influence inputs differ in n");
  for (Index i = 1; i < n; ++i) {
    if (sorted_y[i] < sorted_y[i - 1]) fail(ErrorCode::InvalidArgument, "influence inputs must be sorted by time");
  }
  const Index k = scores.cols();
  const double nd = static_cast<double>(n);

  // Tie groups [start, end) of equal y; den = n - #{l : y_l <= y}.
  std::vector<Index> group_end(static_cast<std::size_t>(n));
  for (Index i = 0; i < n;) {
    Index e = i + 1;
    while (e < n && sorted_y[e] == sorted_y[i]) ++e;
    for (Index r = i; r < e; ++r) group_end[static_cast<std::size_t>(r)] = e;
    i = e;
  }
  auto den = [&](Index i) { return nd - static_cast<double>(group_end[static_cast<std::size_t>(i)]); };

  InfluenceTable table;
  table.tau0.resize(n);
  {
    double below = 0.0;  // sum over censored rows strictly below the current group
    for (Index i = 0; i < n;) {
      const Index e = group_end[static_cast<std::size_t>(i)];
      for (Index r = i; r < e; ++r) table.tau0[r] = std::exp(below);
      for (Index r = i; r < e; ++r) {
        if (status[r] == 0 && den(r) > 0.0) below += 1.0 / den(r);
      }
      i = e;
    }
  }

  // a_l = delta_l * tau0(y_l) * score_l; above(i) = sum over l with y_l > y_i.
  MatrixXd above(n, k);
  {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(k);
    for (Index e = n; e > 0;) {
      Index s = e - 1;
      while (s > 0 && sorted_y[s - 1] == sorted_y[e - 1]) --s;
      for (Index r = s; r < e; ++r) above.row(r) = acc;
      for (Index r = s; r < e; ++r) {
        if (status[r] == 1) acc += table.tau0[r] * scores.row(r);
      }
      e = s;
    }
  }

  table.zeta.resize(n, k);
  Eigen::RowVectorXd tau2 = Eigen::RowVectorXd::Zero(k);  // accumulated over censored rows strictly below
  for (Index i = 0; i < n;) {
    const Index e = group_end[static_cast<std::size_t>(i)];
    for (Index r = i; r < e; ++r) {
      if (status[r] == 1) {
        table.zeta.row(r) = table.tau0[r] * scores.row(r) - tau2;
      } else {
        const double dr = den(r);
        if (dr > 0.0) {
          table.zeta.row(r) = above.row(r) / dr - tau2;
        } else {
          table.zeta.row(r) = -tau2;
        }
      }
    }
    for (Index r = i; r < e; ++r) {
      const double dr = den(r);
      if (status[r] == 0 && dr > 0.0) tau2 += above.row(r) / (dr * dr);
    }
    i = e;
  }
  return table;
}

InfluenceTable compute_influence(const VectorXd& sorted_y, const VectorXi& status, const MatrixXd& phi,
                                 const VectorXd& response, const VectorXd& theta_hat) {
  if (phi.cols() != theta_hat.size()) fail(ErrorCode::DimensionMismatch, "theta length differs from p");
  if (phi.rows() != response.size()) fail(ErrorCode::DimensionMismatch, "response length differs from n");
  const VectorXd residual = response - phi * theta_hat;
  const MatrixXd scores = phi.array().colwise() * residual.array();
  return influence_from_scores(sorted_y, status, scores);
}

namespace {

MatrixXd centered_zeta(const InfluenceTable& table) {
  const Index n = table.zeta.rows();
  if (n < 2) fail(ErrorCode::InvalidArgument, "sample covariance needs n >= 2");
  const Eigen::RowVectorXd mean = table.zeta.colwise().mean();
  return table.zeta.rowwise() - mean;
}

}  // namespace

MatrixXd influence_covariance(const InfluenceTable& table) {
  const MatrixXd zc = centered_zeta(table);
  MatrixXd sigma = MatrixXd::Zero(zc.cols(), zc.cols());
  sigma.selfadjointView<Eigen::Lower>().rankUpdate(zc.transpose(), 1.0 / static_cast<double>(zc.rows() - 1));
  sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();
  return sigma;
}

VectorXd lambda_diagonal(const InfluenceTable& table, const MatrixXd& m_hat) {
  if (m_hat.cols() != table.zeta.cols()) fail(ErrorCode::DimensionMismatch, "M columns differ from influence width");
  const MatrixXd zc = centered_zeta(table);
  const MatrixXd proj = zc * m_hat.transpose();
  return proj.colwise().squaredNorm().transpose() / static_cast<double>(zc.rows() - 1);
}

CovarianceEstimate covariance_from_influence(const InfluenceTable& table, CovarianceMode mode, const MatrixXd* m_hat) {
  CovarianceEstimate out;
  if (mode == CovarianceMode::Full) {
    out.sigma = influence_covariance(table);
    if (m_hat != nullptr) {
      if (m_hat->cols() != out.sigma->cols()) fail(ErrorCode::DimensionMismatch, "M columns differ from influence width");
      out.lambda_diag = ((*m_hat) * (*out.sigma)).cwiseProduct(*m_hat).rowwise().sum();
    }
    return out;
  }
  if (m_hat == nullptr) fail(ErrorCode::InvalidArgument, "diagonal mode needs the decorrelating matrix");
  out.lambda_diag = lambda_diagonal(table, *m_hat);
  return out;
}

}  // namespace hierfdr
