#pragma once

#include "hierfdr/dataset.hpp"
#include "hierfdr/km_weights.hpp"
#include "hierfdr/penalized_wls.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace hierfdr {

/// Phi^T W Phi / n, i.e. sum_i w_i phi_i phi_i^T. Exactly symmetric.
MatrixXd weighted_gram(const MatrixXd& phi, const VectorXd& w);
MatrixXd weighted_gram(const AugmentedDesign& design, const KmWeights& weights);

/// One row of the decorrelating matrix together with feasibility figures that
/// are recomputed from `m` after the solve.
struct DecorrelatorColumn {
  VectorXd m;
  double mu_used = 0.0;
  double slack_gamma = 0.0;   // ||Gamma m - e_i||_inf
  double slack_design = 0.0;  // ||W^{1/2} Phi m||_inf
  double objective = 0.0;     // m^T Gamma m
  int retries = 0;            // number of mu doublings
  bool design_bound_active = false;
};

struct ColumnCertificate {
  double mu_used = 0.0;
  double slack_gamma = 0.0;
  double slack_design = 0.0;
  double objective = 0.0;
  int retries = 0;
  bool design_bound_active = false;
};

inline constexpr int kMaxMuDoublings = 6;

/// mu = c * sqrt(log p / n)
double default_mu(Index p, Index n, double c = 2.0);

/// Solves  min m^T Gamma m  s.t. ||Gamma m - e_i||_inf <= mu, ||W^{1/2} Phi m||_inf <= n^c0.
///
/// The first constraint alone is handled through its Lagrange dual
///   min 1/2 b^T Gamma b - b_i + mu ||b||_1,
/// whose minimiser is the primal optimum. If that point breaks the second
/// bound a primal-dual splitting run on the full problem takes over. When
/// the dual is unbounded (mu infeasible) mu is doubled, at most six times.
DecorrelatorColumn solve_decorrelator_column(const MatrixXd& gamma, const MatrixXd& phi, const VectorXd& w, Index i,
                                             double mu, double c0, double tol = 1e-6);

struct DebiasOptions {
  double mu_constant = 2.0;
  std::optional<double> mu;  // overrides mu_constant when set
  double c0 = 0.45;
  double tol = 1e-6;
  std::size_t threads = 1;
};

struct DebiasedFit {
  VectorXd theta_d;
  MatrixXd m_hat;  // row i is the solved m_i
  std::vector<ColumnCertificate> certificates;
  LassoFit lasso;
  MatrixXd gamma_hat;
  double mu = 0.0;  // requested mu before any doubling

  double max_mu_used() const;
};

/// theta_d = theta_hat + M Phi^T W (y - Phi theta_hat) / n on the centered
/// design. `gamma` may be passed when already computed.
DebiasedFit debias_estimate(const LassoFit& lasso, const AugmentedDesign& design, const VectorXd& y,
                            const KmWeights& weights, const DebiasOptions& options,
                            const MatrixXd* gamma = nullptr);

/// Binary dump: magic "HFDRDBG1", int64 p, int64 n, then M and Gamma as
/// row-major float64.
void write_debias_dump(const std::filesystem::path& path, const DebiasedFit& fit, Index n);

}  // namespace hierfdr
