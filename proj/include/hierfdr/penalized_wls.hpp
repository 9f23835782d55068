#pragma once

#include "hierfdr/dataset.hpp"
#include "hierfdr/error.hpp"
#include "hierfdr/km_weights.hpp"

#include <variant>
#include <vector>

namespace hierfdr {

enum class PenaltyKind { Lasso, Mcp };

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::Lasso;
  double lambda = 0.0;
  double xi = 3.0;  // MCP concavity, must exceed 1

  static PenaltySpec lasso(double lambda) { return {PenaltyKind::Lasso, lambda, 3.0}; }
  static PenaltySpec mcp(double lambda, double xi = 3.0) { return {PenaltyKind::Mcp, lambda, xi}; }

  void validate() const;
  /// Penalty value summed over coordinates.
  double value(const VectorXd& theta) const;
  /// Derivative magnitude of the penalty at |t| > 0.
  double slope(double abs_t) const;
};

/// Sufficient statistics of (1/2n)||W^{1/2}(y - Phi theta)||^2 with W = diag(n w):
/// gram = Phi^T diag(w) Phi, cross = Phi^T diag(w) y, yy = y^T diag(w) y.
struct WeightedLsProblem {
  MatrixXd gram;
  VectorXd cross;
  double yy = 0.0;

  static WeightedLsProblem from_design(const MatrixXd& phi, const VectorXd& y, const VectorXd& w);
  Index p() const { return cross.size(); }
  double loss(const VectorXd& theta) const;
  /// -Phi^T W (y - Phi theta) / n
  VectorXd gradient(const VectorXd& theta) const;
};

struct SolverControl {
  double tol = 1e-7;
  int max_iter = 100000;  // sweeps
};

struct LassoFit {
  VectorXd theta_hat;
  PenaltySpec penalty;
  double lambda = 0.0;
  double objective = 0.0;
  double kkt_violation = 0.0;
  int n_iter = 0;
};

/// Thrown when coordinate descent runs out of sweeps. Carries the last iterate.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, LassoFit partial)
      : Error(ErrorCode::NonConvergence, what), partial_(std::move(partial)) {}
  const LassoFit& partial() const { return partial_; }

 private:
  LassoFit partial_;
};

/// Smallest lambda at which the zero vector solves the Lasso: ||Phi^T W y / n||_inf.
double lambda_max(const WeightedLsProblem& problem);

/// Largest violation of the stationarity conditions at theta (subgradient
/// slack for the Lasso, the analogous MCP condition otherwise).
double kkt_violation(const WeightedLsProblem& problem, const VectorXd& theta, const PenaltySpec& penalty);

/// Cyclic coordinate descent with active-set sweeps on the Gram form. The
/// per-coordinate step divides by gram(j, j), which is the same as running on
/// columns scaled to unit weighted norm. The penalty always applies to theta on
/// the original scale.
LassoFit fit_penalized(const WeightedLsProblem& problem, const PenaltySpec& penalty, const SolverControl& control,
                       const VectorXd* warm_start = nullptr);

LassoFit fit_lasso(const AugmentedDesign& design, const VectorXd& y, const KmWeights& weights,
                   const PenaltySpec& penalty, double tol = 1e-7, int max_iter = 100000);
LassoFit fit_mcp(const AugmentedDesign& design, const VectorXd& y, const KmWeights& weights,
                 const PenaltySpec& penalty, double tol = 1e-7, int max_iter = 100000);

/// Objective recomputed directly from the design.
double penalized_objective(const MatrixXd& phi, const VectorXd& y, const VectorXd& w, const VectorXd& theta,
                           const PenaltySpec& penalty);

struct FixedRate {
  double c = 1.0;
};
struct CrossValidate {
  int folds = 10;
  int grid_size = 100;
};
using LambdaMode = std::variant<FixedRate, CrossValidate>;

struct LambdaSelection {
  double lambda = 0.0;
  std::vector<double> grid;      // empty for FixedRate
  std::vector<double> cv_error;  // per grid point, summed over folds
  Index best = -1;
};

/// K-fold CV works on the raw time-sorted design: each training fold gets its
/// own KM weights and centering, and held-out error is the held-out fold's
/// KM-weighted squared prediction error. Folds are interleaved in time order.
LambdaSelection select_lambda(const AugmentedDesign& sorted_design, const VectorXd& sorted_y,
                              const VectorXi& sorted_status, const LambdaMode& mode,
                              const PenaltySpec& penalty_shape = PenaltySpec::lasso(0.0),
                              std::size_t threads = 1);

}  // namespace hierfdr
