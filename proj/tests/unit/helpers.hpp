#pragma once

#include "hierfdr/dataset.hpp"
#include "hierfdr/error.hpp"

#include <Eigen/Dense>

#include <random>

namespace testing {

using hierfdr::Index;
using hierfdr::MatrixXd;
using hierfdr::VectorXd;
using hierfdr::VectorXi;

inline MatrixXd gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

/// Continuous log-times with roughly `censor_prob` censoring.
inline hierfdr::SurvivalDataset random_dataset(Index n, Index d, Index q, double censor_prob, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::bernoulli_distribution censored(censor_prob);
  VectorXd y(n);
  VectorXi status(n);
  for (Index i = 0; i < n; ++i) {
    y[i] = normal(rng);
    status[i] = censored(rng) ? 0 : 1;
  }
  return hierfdr::SurvivalDataset(y, status, gaussian_matrix(n, d, rng), gaussian_matrix(n, q, rng));
}

}  // namespace testing
