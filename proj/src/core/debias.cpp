#include "hierfdr/debias.hpp"

#include "hierfdr/error.hpp"
#include "hierfdr/log.hpp"
#include "hierfdr/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

namespace hierfdr {

MatrixXd weighted_gram(const MatrixXd& phi, const VectorXd& w) {
  if (phi.rows() != w.size()) fail(ErrorCode::DimensionMismatch, "weights length differs from design rows");
  std::vector<Index> rows;
  for (Index i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) rows.push_back(i);
  }
  MatrixXd scaled(static_cast<Index>(rows.size()), phi.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    scaled.row(static_cast<Index>(r)) = std::sqrt(w[rows[r]]) * phi.row(rows[r]);
  }
  MatrixXd gram = MatrixXd::Zero(phi.cols(), phi.cols());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  return gram;
}

MatrixXd weighted_gram(const AugmentedDesign& design, const KmWeights& weights) {
  return weighted_gram(design.phi, weights.w);
}

double default_mu(Index p, Index n, double c) {
  return c * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
}

namespace {

constexpr int kDualMaxSweeps = 5000;
constexpr double kDualObjectiveFloor = -1e8;

// min 1/2 b^T G b - b_i + mu ||b||_1 by coordinate descent. Returns nullopt
// when the objective runs away (dual unbounded, hence primal infeasible) or
// the sweep budget is exhausted.
std::optional<VectorXd> solve_dual_lasso(const MatrixXd& gamma, Index i, double mu, double tol) {
  const Index p = gamma.rows();
  const VectorXd diag = gamma.diagonal();
  VectorXd beta = VectorXd::Zero(p);
  VectorXd g = VectorXd::Zero(p);  // gamma * beta - e_i
  g[i] = -1.0;

  auto update = [&](Index j) {
    const double v = diag[j];
    if (!(v > 0.0)) return 0.0;
    const double z = v * beta[j] - g[j];
    double fresh = 0.0;
    if (z > mu) fresh = (z - mu) / v;
    if (z < -mu) fresh = (z + mu) / v;
    const double delta = fresh - beta[j];
    if (delta != 0.0) {
      beta[j] = fresh;
      g.noalias() += delta * gamma.col(j);
    }
    return std::abs(delta);
  };
  auto kkt = [&]() {
    g.noalias() = gamma * beta;
    g[i] -= 1.0;
    double worst = 0.0;
    for (Index j = 0; j < p; ++j) {
      const double slack = beta[j] != 0.0 ? std::abs(g[j] + (beta[j] > 0.0 ? mu : -mu))
                                          : std::max(0.0, std::abs(g[j]) - mu);
      worst = std::max(worst, slack);
    }
    return worst;
  };

  std::vector<Index> active;
  int sweeps = 0;
  while (sweeps < kDualMaxSweeps) {
    double max_delta = 0.0;
    for (Index j = 0; j < p; ++j) max_delta = std::max(max_delta, update(j));
    ++sweeps;
    const double objective = 0.5 * beta.dot(g) - 0.5 * beta[i] + mu * beta.lpNorm<1>();
    if (!std::isfinite(objective) || objective < kDualObjectiveFloor) return std::nullopt;
    if (max_delta < tol * (1.0 + beta.lpNorm<Eigen::Infinity>()) && kkt() <= tol) return beta;
    active.clear();
    for (Index j = 0; j < p; ++j) {
      if (beta[j] != 0.0) active.push_back(j);
    }
    for (int inner = 0; inner < 10; ++inner) {
      double inner_delta = 0.0;
      for (Index j : active) inner_delta = std::max(inner_delta, update(j));
      ++sweeps;
      if (inner_delta < tol * (1.0 + beta.lpNorm<Eigen::Infinity>())) break;
    }
  }
  return std::nullopt;
}

struct Slacks {
  double gamma = 0.0;
  double design = 0.0;
  double objective = 0.0;
};

Slacks measure(const MatrixXd& gamma, const MatrixXd& phi, const VectorXd& root_nw, Index i, const VectorXd& m) {
  VectorXd gm = gamma * m;
  Slacks s;
  s.objective = m.dot(gm);
  gm[i] -= 1.0;
  s.gamma = gm.lpNorm<Eigen::Infinity>();
  s.design = (root_nw.cwiseProduct(phi * m)).lpNorm<Eigen::Infinity>();
  return s;
}

// Condat-Vu primal-dual splitting for min m^T G m with both box constraints,
// warm-started from the relaxed solution. Boxes are shrunk by a relative margin
// so that approximate iterates are feasible for the original bounds. Returns the
// feasible iterate with the smallest objective, if any.
std::optional<VectorXd> solve_full_problem(const MatrixXd& gamma, const MatrixXd& phi, const VectorXd& root_nw, Index i,
                                           double mu, double bound, const VectorXd& start) {
  constexpr double kMargin = 1e-3;
  constexpr int kMaxIter = 20000;
  const Index p = gamma.rows();
  const double n = static_cast<double>(phi.rows());
  // Second block scaled by 1/sqrt(n) so both blocks share the Gram spectrum.
  const double inv_root_n = 1.0 / std::sqrt(n);
  auto apply_a = [&](const VectorXd& m) -> VectorXd { return inv_root_n * root_nw.cwiseProduct(phi * m); };
  auto apply_at = [&](const VectorXd& v) -> VectorXd {
    return inv_root_n * (phi.transpose() * root_nw.cwiseProduct(v));
  };
  const double top = Eigen::SelfAdjointEigenSolver<MatrixXd>(gamma, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double k_norm = std::sqrt(top * top + top);
  const double lipschitz = 2.0 * top;
  const double sigma = 1.0 / k_norm;
  const double tau = 0.99 / (0.5 * lipschitz + k_norm);
  const double mu_in = mu * (1.0 - kMargin);
  const double bound_in = bound * inv_root_n * (1.0 - kMargin);

  VectorXd m = start;
  VectorXd y1 = -2.0 * m;
  VectorXd y2 = VectorXd::Zero(phi.rows());
  std::optional<VectorXd> best;
  double best_obj = std::numeric_limits<double>::infinity();
  double last_obj = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= kMaxIter; ++it) {
    const VectorXd step = 2.0 * (gamma * m) + gamma * y1 + apply_at(y2);
    const VectorXd m_next = m - tau * step;
    const VectorXd extra = 2.0 * m_next - m;
    VectorXd u1 = y1 + sigma * (gamma * extra);
    VectorXd u2 = y2 + sigma * apply_a(extra);
    // prox of the conjugate box indicator via Moreau.
    for (Index j = 0; j < p; ++j) {
      const double centre = j == i ? 1.0 : 0.0;
      const double proj = std::clamp(u1[j] / sigma, centre - mu_in, centre + mu_in);
      u1[j] -= sigma * proj;
    }
    for (Index r = 0; r < u2.size(); ++r) {
      const double proj = std::clamp(u2[r] / sigma, -bound_in, bound_in);
      u2[r] -= sigma * proj;
    }
    m = m_next;
    y1 = std::move(u1);
    y2 = std::move(u2);
    if (it % 50 == 0) {
      const Slacks s = measure(gamma, phi, root_nw, i, m);
      if (s.gamma <= mu && s.design <= bound && s.objective < best_obj) {
        best_obj = s.objective;
        best = m;
      }
      if (best && std::abs(last_obj - s.objective) <= 1e-9 * (1.0 + std::abs(s.objective))) break;
      last_obj = s.objective;
    }
  }
  return best;
}

}  // namespace

DecorrelatorColumn solve_decorrelator_column(const MatrixXd& gamma, const MatrixXd& phi, const VectorXd& w, Index i,
                                             double mu, double c0, double tol) {
  const Index p = gamma.rows();
  if (gamma.cols() != p || phi.cols() != p) fail(ErrorCode::DimensionMismatch, "gamma and design disagree on p");
  if (i < 0 || i >= p) fail(ErrorCode::InvalidArgument, "column index out of range");
  if (!(mu > 0.0)) fail(ErrorCode::InvalidArgument, "mu must be positive");
  if (!(c0 > 0.25 && c0 < 0.5)) fail(ErrorCode::InvalidArgument, "c0 must lie in (1/4, 1/2)");
  if (!(tol > 0.0)) fail(ErrorCode::InvalidArgument, "tol must be positive");
  const Index n = phi.rows();
  const VectorXd root_nw = (static_cast<double>(n) * w).cwiseMax(0.0).cwiseSqrt();
  const double bound = std::pow(static_cast<double>(n), c0);

  for (int attempt = 0; attempt <= kMaxMuDoublings; ++attempt) {
    const double mu_try = mu * std::ldexp(1.0, attempt);
    // Solving at a slightly smaller mu leaves room for the KKT tolerance.
    const double inner_tol = std::min(tol, 0.5 * mu_try);
    std::optional<VectorXd> m = solve_dual_lasso(gamma, i, mu_try - inner_tol, inner_tol);
    if (!m) continue;
    Slacks s = measure(gamma, phi, root_nw, i, *m);
    bool design_active = false;
    if (s.design > bound) {
      m = solve_full_problem(gamma, phi, root_nw, i, mu_try, bound, *m);
      if (!m) continue;
      s = measure(gamma, phi, root_nw, i, *m);
      design_active = true;
    }
    if (s.gamma > mu_try + 1e-8 || s.design > bound + 1e-8) continue;
    DecorrelatorColumn col;
    col.m = std::move(*m);
    col.mu_used = mu_try;
    col.slack_gamma = s.gamma;
    col.slack_design = s.design;
    col.objective = s.objective;
    col.retries = attempt;
    col.design_bound_active = design_active;
    return col;
  }
  std::ostringstream os;
  os << "decorrelator column " << i + 1 << " infeasible after " << kMaxMuDoublings << " doublings of mu=" << mu;
  fail(ErrorCode::Infeasible, os.str());
}

double DebiasedFit::max_mu_used() const {
  double top = 0.0;
  for (const auto& c : certificates) top = std::max(top, c.mu_used);
  return top;
}

DebiasedFit debias_estimate(const LassoFit& lasso, const AugmentedDesign& design, const VectorXd& y,
                            const KmWeights& weights, const DebiasOptions& options, const MatrixXd* gamma) {
  const MatrixXd& phi = design.phi;
  const Index n = phi.rows();
  const Index p = phi.cols();
  if (lasso.theta_hat.size() != p) fail(ErrorCode::DimensionMismatch, "Lasso estimate length differs from p");
  DebiasedFit fit;
  fit.lasso = lasso;
  fit.gamma_hat = gamma != nullptr ? *gamma : weighted_gram(phi, weights.w);
  fit.mu = options.mu.value_or(default_mu(p, n, options.mu_constant));
  fit.m_hat.resize(p, p);
  fit.certificates.resize(static_cast<std::size_t>(p));

  std::vector<std::string> errors(static_cast<std::size_t>(p));
  parallel_for(static_cast<std::size_t>(p), options.threads, [&](std::size_t idx) {
    const Index i = static_cast<Index>(idx);
    try {
      DecorrelatorColumn col = solve_decorrelator_column(fit.gamma_hat, phi, weights.w, i, fit.mu, options.c0, options.tol);
      fit.m_hat.row(i) = col.m.transpose();
      fit.certificates[idx] = {col.mu_used, col.slack_gamma, col.slack_design, col.objective, col.retries,
                               col.design_bound_active};
    } catch (const Error& e) {
      errors[idx] = e.what();
    }
  });
  std::vector<Index> failed;
  for (Index i = 0; i < p; ++i) {
    if (!errors[static_cast<std::size_t>(i)].empty()) failed.push_back(i);
  }
  if (!failed.empty()) {
    std::ostringstream os;
    os << "decorrelator failed for " << failed.size() << " column(s):";
    for (std::size_t k = 0; k < failed.size() && k < 20; ++k) os << ' ' << failed[k] + 1;
    fail(ErrorCode::Infeasible, os.str());
  }
  const VectorXd residual = y - phi * lasso.theta_hat;
  const VectorXd score = phi.transpose() * weights.w.cwiseProduct(residual);
  fit.theta_d = lasso.theta_hat + fit.m_hat * score;
  return fit;
}

void write_debias_dump(const std::filesystem::path& path, const DebiasedFit& fit, Index n) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  const std::int64_t p64 = fit.m_hat.rows();
  const std::int64_t n64 = n;
  out.write("HFDRDBG1", 8);
  out.write(reinterpret_cast<const char*>(&p64), sizeof p64);
  out.write(reinterpret_cast<const char*>(&n64), sizeof n64);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m = fit.m_hat;
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> g = fit.gamma_hat;
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(g.data()), static_cast<std::streamsize>(g.size() * sizeof(double)));
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

}  // namespace hierfdr
