#include "hierfdr/penalized_wls.hpp"

#include "hierfdr/debias.hpp"
#include "hierfdr/log.hpp"
#include "hierfdr/parallel.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>

namespace hierfdr {
namespace {

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

double mcp_value(double t, double lambda, double xi) {
  const double a = std::abs(t);
  if (a <= lambda * xi) return lambda * a - a * a / (2.0 * xi);
  return 0.5 * lambda * lambda * xi;
}

// argmin_t (v/2) t^2 - z t + rho(t) for the MCP; v > 0.
double mcp_coordinate(double z, double v, double lambda, double xi) {
  auto f = [&](double t) { return 0.5 * v * t * t - z * t + mcp_value(t, lambda, xi); };
  const double s = z >= 0.0 ? 1.0 : -1.0;
  const double az = std::abs(z);
  const double knot = lambda * xi;
  double best = 0.0;
  double best_f = 0.0;
  auto consider = [&](double t) {
    const double ft = f(t);
    if (ft < best_f) {
      best = t;
      best_f = ft;
    }
  };
  // Flat region |t| >= lambda * xi.
  consider(s * std::max(az / v, knot));
  // Concave-corrected region 0 < |t| < lambda * xi.
  const double curv = v - 1.0 / xi;
  if (curv > 0.0) {
    if (az > lambda) consider(s * std::min((az - lambda) / curv, knot));
  } else {
    consider(s * knot);
  }
  return best;
}

double coordinate_update(double z, double v, const PenaltySpec& penalty) {
  if (penalty.kind == PenaltyKind::Lasso) return soft_threshold(z, penalty.lambda) / v;
  return mcp_coordinate(z, v, penalty.lambda, penalty.xi);
}

}  // namespace

void PenaltySpec::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorCode::InvalidArgument, "lambda must be finite and >= 0");
  if (kind == PenaltyKind::Mcp && !(xi > 1.0)) fail(ErrorCode::InvalidArgument, "MCP needs xi > 1");
}

double PenaltySpec::value(const VectorXd& theta) const {
  if (kind == PenaltyKind::Lasso) return lambda * theta.lpNorm<1>();
  double total = 0.0;
  for (Index j = 0; j < theta.size(); ++j) total += mcp_value(theta[j], lambda, xi);
  return total;
}

double PenaltySpec::slope(double abs_t) const {
  if (kind == PenaltyKind::Lasso) return lambda;
  return abs_t <= lambda * xi ? lambda - abs_t / xi : 0.0;
}

WeightedLsProblem WeightedLsProblem::from_design(const MatrixXd& phi, const VectorXd& y, const VectorXd& w) {
  if (phi.rows() != y.size() || w.size() != y.size()) fail(ErrorCode::DimensionMismatch, "design/response/weights differ in n");
  WeightedLsProblem out;
  out.gram = weighted_gram(phi, w);
  const VectorXd wy = w.cwiseProduct(y);
  out.cross = phi.transpose() * wy;
  out.yy = wy.dot(y);
  return out;
}

double WeightedLsProblem::loss(const VectorXd& theta) const {
  return 0.5 * (yy - 2.0 * cross.dot(theta) + theta.dot(gram * theta));
}

VectorXd WeightedLsProblem::gradient(const VectorXd& theta) const { return gram * theta - cross; }

double lambda_max(const WeightedLsProblem& problem) { return problem.cross.lpNorm<Eigen::Infinity>(); }

double kkt_violation(const WeightedLsProblem& problem, const VectorXd& theta, const PenaltySpec& penalty) {
  const VectorXd g = problem.gradient(theta);
  double worst = 0.0;
  for (Index j = 0; j < theta.size(); ++j) {
    double slack;
    if (theta[j] != 0.0) {
      const double sgn = theta[j] > 0.0 ? 1.0 : -1.0;
      slack = std::abs(g[j] + sgn * penalty.slope(std::abs(theta[j])));
    } else {
      slack = std::max(0.0, std::abs(g[j]) - penalty.lambda);
    }
    worst = std::max(worst, slack);
  }
  return worst;
}

LassoFit fit_penalized(const WeightedLsProblem& problem, const PenaltySpec& penalty, const SolverControl& control,
                       const VectorXd* warm_start) {
  penalty.validate();
  if (!(control.tol > 0.0)) fail(ErrorCode::InvalidArgument, "tol must be positive");
  const Index p = problem.p();
  const MatrixXd& gram = problem.gram;
  const VectorXd diag = gram.diagonal();

  VectorXd theta = VectorXd::Zero(p);
  if (warm_start != nullptr && warm_start->size() == p) theta = *warm_start;
  for (Index j = 0; j < p; ++j) {
    if (!(diag[j] > 0.0)) theta[j] = 0.0;
  }
  VectorXd g = problem.gradient(theta);

#ifndef NDEBUG
  double last_obj = problem.loss(theta) + penalty.value(theta);
#endif

  auto update = [&](Index j) {
    const double v = diag[j];
    if (!(v > 0.0)) return 0.0;
    const double old = theta[j];
    const double z = v * old - g[j];
    const double fresh = coordinate_update(z, v, penalty);
    const double delta = fresh - old;
    if (delta != 0.0) {
      theta[j] = fresh;
      g.noalias() += delta * gram.col(j);
    }
    return std::abs(delta);
  };

  std::vector<Index> active;
  int sweeps = 0;
  double kkt = std::numeric_limits<double>::infinity();
  while (sweeps < control.max_iter) {
    // Full sweep.
    double max_delta = 0.0;
    for (Index j = 0; j < p; ++j) max_delta = std::max(max_delta, update(j));
    ++sweeps;
#ifndef NDEBUG
    {
      const double obj = problem.loss(theta) + penalty.value(theta);
      assert(obj <= last_obj + 1e-9 * (1.0 + std::abs(last_obj)));
      last_obj = obj;
    }
#endif
    const double scale = 1.0 + theta.lpNorm<Eigen::Infinity>();
    if (max_delta < control.tol * scale) {
      g = problem.gradient(theta);
      kkt = kkt_violation(problem, theta, penalty);
      if (kkt <= control.tol) break;
    }
    active.clear();
    for (Index j = 0; j < p; ++j) {
      if (theta[j] != 0.0) active.push_back(j);
    }
    for (int inner = 0; inner < 10 && sweeps < control.max_iter; ++inner) {
      double inner_delta = 0.0;
      for (Index j : active) inner_delta = std::max(inner_delta, update(j));
      ++sweeps;
      if (inner_delta < control.tol * (1.0 + theta.lpNorm<Eigen::Infinity>())) break;
    }
  }

  LassoFit fit;
  fit.penalty = penalty;
  fit.lambda = penalty.lambda;
  fit.n_iter = sweeps;
  fit.kkt_violation = kkt_violation(problem, theta, penalty);
  fit.objective = problem.loss(theta) + penalty.value(theta);
  fit.theta_hat = std::move(theta);
  if (fit.kkt_violation > control.tol) {
    std::ostringstream os;
    os << "coordinate descent did not converge in " << sweeps << " sweeps (kkt violation " << fit.kkt_violation << ")";
    throw NonConvergenceError(os.str(), std::move(fit));
  }
  return fit;
}

double penalized_objective(const MatrixXd& phi, const VectorXd& y, const VectorXd& w, const VectorXd& theta,
                           const PenaltySpec& penalty) {
  const VectorXd r = y - phi * theta;
  return 0.5 * w.dot(r.cwiseProduct(r)) + penalty.value(theta);
}

namespace {

LassoFit fit_from_design(const AugmentedDesign& design, const VectorXd& y, const KmWeights& weights,
                         const PenaltySpec& penalty, double tol, int max_iter) {
  const WeightedLsProblem problem = WeightedLsProblem::from_design(design.phi, y, weights.w);
  LassoFit fit = fit_penalized(problem, penalty, SolverControl{tol, max_iter});
  fit.objective = penalized_objective(design.phi, y, weights.w, fit.theta_hat, penalty);
  return fit;
}

}  // namespace

LassoFit fit_lasso(const AugmentedDesign& design, const VectorXd& y, const KmWeights& weights,
                   const PenaltySpec& penalty, double tol, int max_iter) {
  if (penalty.kind != PenaltyKind::Lasso) fail(ErrorCode::InvalidArgument, "fit_lasso needs a Lasso penalty");
  return fit_from_design(design, y, weights, penalty, tol, max_iter);
}

LassoFit fit_mcp(const AugmentedDesign& design, const VectorXd& y, const KmWeights& weights, const PenaltySpec& penalty,
                 double tol, int max_iter) {
  if (penalty.kind != PenaltyKind::Mcp) fail(ErrorCode::InvalidArgument, "fit_mcp needs an MCP penalty");
  return fit_from_design(design, y, weights, penalty, tol, max_iter);
}

namespace {

MatrixXd take_rows(const MatrixXd& m, const std::vector<Index>& rows) {
  MatrixXd out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

template <class Vec>
Vec take(const Vec& v, const std::vector<Index>& rows) {
  Vec out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = v[rows[i]];
  return out;
}

struct FoldPath {
  std::vector<double> error;  // one entry per grid point reached
};

}  // namespace

LambdaSelection select_lambda(const AugmentedDesign& sorted_design, const VectorXd& sorted_y,
                              const VectorXi& sorted_status, const LambdaMode& mode, const PenaltySpec& penalty_shape,
                              std::size_t threads) {
  const Index n = sorted_design.phi.rows();
  const Index p = sorted_design.phi.cols();
  LambdaSelection out;
  if (const auto* fixed = std::get_if<FixedRate>(&mode)) {
    if (!(fixed->c > 0.0)) fail(ErrorCode::InvalidArgument, "fixed-rate constant must be positive");
    out.lambda = fixed->c * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
    return out;
  }
  const auto& cv = std::get<CrossValidate>(mode);
  if (cv.folds < 2) fail(ErrorCode::InvalidArgument, "cross-validation needs at least two folds");
  if (n < 2 * cv.folds) fail(ErrorCode::InvalidArgument, "cross-validation needs n >= 2 * folds");
  if (cv.grid_size < 1) fail(ErrorCode::InvalidArgument, "grid size must be positive");

  const KmWeights full_w = km_weights_from_status(sorted_status);
  if (!(full_w.w.sum() > 0.0)) fail(ErrorCode::InvalidArgument, "all observations are censored");
  const CenteredDesign full = center_columns(sorted_design, sorted_y, full_w.w);
  const VectorXd full_cross = full.design.phi.transpose() * full_w.w.cwiseProduct(full.y);
  const double top = full_cross.lpNorm<Eigen::Infinity>();
  out.grid.resize(static_cast<std::size_t>(cv.grid_size));
  for (int k = 0; k < cv.grid_size; ++k) {
    const double frac = cv.grid_size == 1 ? 0.0 : static_cast<double>(k) / (cv.grid_size - 1);
    out.grid[static_cast<std::size_t>(k)] = top * std::pow(10.0, -4.0 * frac);
  }

  std::vector<FoldPath> paths(static_cast<std::size_t>(cv.folds));
  parallel_for(static_cast<std::size_t>(cv.folds), threads, [&](std::size_t f) {
    std::vector<Index> train;
    std::vector<Index> test;
    for (Index i = 0; i < n; ++i) (static_cast<std::size_t>(i % cv.folds) == f ? test : train).push_back(i);
    const VectorXi st_train = take(sorted_status, train);
    const KmWeights w_train = km_weights_from_status(st_train);
    if (!(w_train.w.sum() > 0.0)) {
      fail(ErrorCode::InvalidArgument, "cross-validation fold " + std::to_string(f + 1) + " has an all-censored training set");
    }
    const KmWeights w_test = km_weights_from_status(take(sorted_status, test));
    const AugmentedDesign d_train{take_rows(sorted_design.phi, train), sorted_design.index_map};
    const CenteredDesign c_train = center_columns(d_train, take(sorted_y, train), w_train.w);
    const WeightedLsProblem problem = WeightedLsProblem::from_design(c_train.design.phi, c_train.y, w_train.w);
    const MatrixXd x_test = take_rows(sorted_design.phi, test).rowwise() - c_train.column_means.transpose();
    const VectorXd y_test = take(sorted_y, test).array() - c_train.y_mean;
    const Index n_train = static_cast<Index>(train.size());

    VectorXd theta = VectorXd::Zero(p);
    for (double lambda : out.grid) {
      PenaltySpec pen = penalty_shape;
      pen.lambda = lambda;
      try {
        theta = fit_penalized(problem, pen, SolverControl{1e-7, 20000}, &theta).theta_hat;
      } catch (const NonConvergenceError& e) {
        log::debug(std::string("cv path stopped early: ") + e.what());
        break;
      }
      const VectorXd r = y_test - x_test * theta;
      paths[f].error.push_back(w_test.w.dot(r.cwiseProduct(r)));
      const Index nnz = (theta.array() != 0.0).count();
      const double explained = problem.yy > 0.0 ? 1.0 - 2.0 * problem.loss(theta) / problem.yy : 0.0;
      if (nnz >= n_train - 1 || explained > 0.999) break;
    }
  });

  std::size_t reached = out.grid.size();
  for (const auto& path : paths) reached = std::min(reached, path.error.size());
  if (reached == 0) fail(ErrorCode::NonConvergence, "cross-validation produced no usable fits");
  out.cv_error.assign(reached, 0.0);
  for (const auto& path : paths) {
    for (std::size_t k = 0; k < reached; ++k) out.cv_error[k] += path.error[k];
  }
  out.best = static_cast<Index>(std::min_element(out.cv_error.begin(), out.cv_error.end()) - out.cv_error.begin());
  out.lambda = out.grid[static_cast<std::size_t>(out.best)];
  return out;
}

}  // namespace hierfdr
