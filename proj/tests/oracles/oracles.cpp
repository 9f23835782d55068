#include "oracles.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace oracle {

VectorXd km_jumps(const VectorXd& y, const VectorXi& status) {
  const Index n = y.size();
  VectorXd jump = VectorXd::Zero(n);
  double surv = 1.0;
  Index i = 0;
  while (i < n) {
    Index end = i;
    while (end < n && y[end] == y[i]) ++end;
    const double at_risk = static_cast<double>(n - i);
    Index events = 0;
    for (Index k = i; k < end; ++k) events += status[k];
    if (events > 0) {
      const double next = surv * (1.0 - static_cast<double>(events) / at_risk);
      for (Index k = i; k < end; ++k) {
        if (status[k] == 1) jump[k] = (surv - next) / static_cast<double>(events);
      }
      surv = next;
    }
    i = end;
  }
  return jump;
}

namespace {

double soft(double z, double t) { return z > t ? z - t : (z < -t ? z + t : 0.0); }

}  // namespace

VectorXd lasso_prox_grad(const MatrixXd& phi, const VectorXd& y, const VectorXd& w, double lambda) {
  const Index p = phi.cols();
  const MatrixXd g = phi.transpose() * w.asDiagonal() * phi;
  const VectorXd c = phi.transpose() * w.asDiagonal() * y;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(g);
  const double lip = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
  VectorXd x = VectorXd::Zero(p);
  VectorXd z = x;
  double t = 1.0;
  for (int it = 0; it < 2000000; ++it) {
    const VectorXd grad = g * z - c;
    VectorXd next(p);
    for (Index j = 0; j < p; ++j) next[j] = soft(z[j] - grad[j] / lip, lambda / lip);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double step = (next - x).lpNorm<Eigen::Infinity>();
    // Restart the momentum whenever it points uphill.
    if ((z - next).dot(next - x) > 0.0) {
      z = next;
      t = 1.0;
    } else {
      z = next + ((t - 1.0) / tn) * (next - x);
      t = tn;
    }
    x = next;
    if (step < 1e-15 * (1.0 + x.lpNorm<Eigen::Infinity>()) && it > 10) break;
  }
  // Polish: on the support S with signs s, G_SS x_S = c_S - lambda s_S.
  std::vector<Index> support;
  for (Index j = 0; j < p; ++j) {
    if (x[j] != 0.0) support.push_back(j);
  }
  if (support.empty()) return x;
  const Index k = static_cast<Index>(support.size());
  MatrixXd gs(k, k);
  VectorXd rhs(k);
  for (Index a = 0; a < k; ++a) {
    for (Index b = 0; b < k; ++b) gs(a, b) = g(support[a], support[b]);
    rhs[a] = c[support[a]] - lambda * (x[support[a]] > 0 ? 1.0 : -1.0);
  }
  const VectorXd xs = gs.ldlt().solve(rhs);
  VectorXd polished = VectorXd::Zero(p);
  bool signs_ok = true;
  for (Index a = 0; a < k; ++a) {
    polished[support[a]] = xs[a];
    signs_ok = signs_ok && (xs[a] > 0) == (x[support[a]] > 0) && xs[a] != 0.0;
  }
  if (!signs_ok) return x;
  const VectorXd grad = g * polished - c;
  for (Index j = 0; j < p; ++j) {
    if (polished[j] == 0.0 && std::abs(grad[j]) > lambda * (1.0 + 1e-9)) return x;
  }
  return polished;
}

QpSolution decorrelator_barrier(const MatrixXd& gamma, const MatrixXd& a, Index i, double mu, double bound,
                                const VectorXd* start) {
  const Index p = gamma.cols();
  const Index rows = a.rows();
  VectorXd e = VectorXd::Zero(p);
  e[i] = 1.0;
  // Constraint matrix C m <= h.
  MatrixXd c(2 * p + 2 * rows, p);
  VectorXd h(2 * p + 2 * rows);
  c.topRows(p) = gamma;
  h.head(p) = VectorXd::Constant(p, mu) + e;
  c.middleRows(p, p) = -gamma;
  h.segment(p, p) = VectorXd::Constant(p, mu) - e;
  if (rows > 0) {
    c.middleRows(2 * p, rows) = a;
    c.bottomRows(rows) = -a;
    h.tail(2 * rows) = VectorXd::Constant(2 * rows, bound);
  }
  VectorXd m = start != nullptr ? *start : VectorXd(gamma.ldlt().solve(e));
  if (((h - c * m).array() <= 0.0).any()) throw std::runtime_error("barrier oracle: start point infeasible");

  auto barrier_value = [&](const VectorXd& x, double t) {
    const VectorXd s = h - c * x;
    if ((s.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    return t * x.dot(gamma * x) - s.array().log().sum();
  };
  const double constraints = static_cast<double>(c.rows());
  double t = 1.0;
  while (constraints / t > 1e-13) {
    for (int newton = 0; newton < 200; ++newton) {
      const VectorXd s = h - c * m;
      const VectorXd inv = s.cwiseInverse();
      const VectorXd grad = 2.0 * t * gamma * m + c.transpose() * inv;
      const MatrixXd hess = 2.0 * t * gamma + c.transpose() * inv.cwiseAbs2().asDiagonal() * c;
      const VectorXd step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      if (decrement < 1e-14) break;
      double len = 1.0;
      const double f0 = barrier_value(m, t);
      while (barrier_value(m + len * step, t) > f0 - 0.25 * len * decrement) {
        len *= 0.5;
        if (len < 1e-20) break;
      }
      m += len * step;
    }
    t *= 8.0;
  }
  return {m, m.dot(gamma * m)};
}

GridResult threshold_grid(const VectorXd& u, Index d, Index q, double alpha, int points) {
  const Index p = u.size();
  const double lp = std::log(static_cast<double>(p));
  const double tp = std::sqrt(2.0 * lp - 2.0 * std::log(lp));
  auto tail = [](double t) { return std::erfc(t / std::sqrt(2.0)); };
  auto count = [&](double t) {
    Index r = 0;
    for (Index j = 0; j < d; ++j) {
      if (std::abs(u[j]) < t) continue;
      ++r;
      for (Index k = 0; k < q; ++k) {
        if (std::abs(u[d + q + j * q + k]) >= t) ++r;
      }
    }
    return r;
  };
  GridResult out;
  out.fallback = true;
  out.t = std::sqrt(2.0 * lp);
  for (int g = 0; g < points; ++g) {
    const double t = tp * static_cast<double>(g) / static_cast<double>(points - 1);
    const double gt = tail(t);
    const double ratio = static_cast<double>(d) * gt * (1.0 + static_cast<double>(q) * gt) /
                         static_cast<double>(std::max<Index>(count(t), 1));
    if (ratio <= alpha) {
      out.t = t;
      out.fallback = false;
      break;
    }
  }
  for (Index j = 0; j < d; ++j) {
    if (std::abs(u[j]) < out.t) continue;
    out.selected.push_back(j);
  }
  for (Index j = 0; j < d; ++j) {
    if (std::abs(u[j]) < out.t) continue;
    for (Index k = 0; k < q; ++k) {
      const Index l = d + q + j * q + k;
      if (std::abs(u[l]) >= out.t) out.selected.push_back(l);
    }
  }
  std::sort(out.selected.begin(), out.selected.end());
  return out;
}

}  // namespace oracle
