#include "helpers.hpp"

#include "hierfdr/influence_cov.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace hierfdr;

namespace {

// Direct evaluation of the finite sums, one entry at a time.
MatrixXd literal_zeta(const VectorXd& y, const VectorXi& delta, const MatrixXd& scores, VectorXd* tau0_out = nullptr) {
  const Index n = y.size();
  const Index p = scores.cols();
  auto at_most = [&](double v) {
    double c = 0.0;
    for (Index l = 0; l < n; ++l) c += y[l] <= v ? 1.0 : 0.0;
    return c;
  };
  VectorXd tau0(n);
  for (Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Index k = 0; k < n; ++k) {
      const double den = n - at_most(y[k]);
      if (y[k] < y[i] && delta[k] == 0 && den > 0) s += 1.0 / den;
    }
    tau0[i] = std::exp(s);
  }
  MatrixXd zeta(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      double tau1 = 0.0;
      const double den_i = n - at_most(y[i]);
      if (den_i > 0) {
        for (Index k = 0; k < n; ++k) {
          if (y[k] > y[i] && delta[k] == 1) tau1 += scores(k, j) * tau0[k] / den_i;
        }
      }
      double tau2 = 0.0;
      for (Index k = 0; k < n; ++k) {
        const double den = n - at_most(y[k]);
        if (!(y[k] < y[i] && delta[k] == 0 && den > 0)) continue;
        double num = 0.0;
        for (Index l = 0; l < n; ++l) {
          if (y[l] > y[k] && delta[l] == 1) num += scores(l, j) * tau0[l];
        }
        tau2 += num / (den * den);
      }
      zeta(i, j) = scores(i, j) * tau0[i] * delta[i] + tau1 * (1 - delta[i]) - tau2;
    }
  }
  if (tau0_out) *tau0_out = tau0;
  return zeta;
}

struct Sample {
  VectorXd y;
  VectorXi delta;
  MatrixXd phi;
};

Sample sorted_sample(Index n, Index p, double censor, bool ties, std::mt19937_64& rng) {
  Sample s;
  std::normal_distribution<double> normal;
  std::bernoulli_distribution cens(censor);
  std::uniform_int_distribution<int> grid(0, 6);
  s.y.resize(n);
  s.delta.resize(n);
  for (Index i = 0; i < n; ++i) {
    s.y[i] = ties ? grid(rng) * 0.5 : normal(rng);
    s.delta[i] = cens(rng) ? 0 : 1;
  }
  std::vector<Index> order = time_order(s.y, s.delta);
  VectorXd y(n);
  VectorXi d(n);
  for (Index i = 0; i < n; ++i) {
    y[i] = s.y[order[static_cast<std::size_t>(i)]];
    d[i] = s.delta[order[static_cast<std::size_t>(i)]];
  }
  s.y = y;
  s.delta = d;
  s.phi = testing::gaussian_matrix(n, p, rng);
  return s;
}

}  // namespace

TEST_CASE("uncensored data reduces to the plain scores") {
  std::mt19937_64 rng(1);
  Sample s = sorted_sample(40, 5, 0.0, false, rng);
  const VectorXd theta = VectorXd::Random(5);
  const InfluenceTable t = compute_influence(s.y, s.delta, s.phi, s.y, theta);
  CHECK((t.tau0.array() == 1.0).all());
  const VectorXd r = s.y - s.phi * theta;
  const MatrixXd scores = s.phi.array().colwise() * r.array();
  CHECK(t.zeta == scores);
}

TEST_CASE("three-row hand example") {
  const VectorXd y = (VectorXd(3) << 1.0, 2.0, 3.0).finished();
  const VectorXi delta = (VectorXi(3) << 1, 0, 1).finished();
  const MatrixXd scores = (MatrixXd(3, 1) << 0.5, -1.0, 2.0).finished();
  const InfluenceTable t = influence_from_scores(y, delta, scores);
  CHECK(t.tau0[0] == doctest::Approx(1.0));
  CHECK(t.tau0[1] == doctest::Approx(1.0));
  CHECK(t.tau0[2] == doctest::Approx(std::exp(1.0)));
  // Row 2: censored with one later event, den = 1; row 3 subtracts that same sum.
  CHECK(t.zeta(1, 0) == doctest::Approx(2.0 * std::exp(1.0)));
  CHECK(t.zeta(2, 0) == doctest::Approx(2.0 * std::exp(1.0) - 2.0 * std::exp(1.0)));
  CHECK(t.zeta(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("zero coefficients give phi times y") {
  std::mt19937_64 rng(2);
  Sample s = sorted_sample(25, 3, 0.0, false, rng);
  const InfluenceTable t = compute_influence(s.y, s.delta, s.phi, s.y, VectorXd::Zero(3));
  for (Index i = 0; i < 25; ++i) {
    for (Index j = 0; j < 3; ++j) CHECK(t.zeta(i, j) == s.phi(i, j) * s.y[i]);
  }
}

TEST_CASE("matches the literal sums with and without ties") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    const bool ties = rep % 2 == 1;
    Sample s = sorted_sample(30, 4, 0.35, ties, rng);
    if (rep % 5 == 0) s.delta[29] = 0;  // largest observation censored
    const MatrixXd scores = s.phi.array().colwise() * s.y.array();
    VectorXd tau0;
    const MatrixXd ref = literal_zeta(s.y, s.delta, scores, &tau0);
    const InfluenceTable t = influence_from_scores(s.y, s.delta, scores);
    CHECK((t.tau0 - tau0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((t.zeta - ref).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((t.tau0.array() >= 1.0).all());
  }
}

TEST_CASE("unsorted input is rejected") {
  const VectorXd y = (VectorXd(2) << 2.0, 1.0).finished();
  const VectorXi d = VectorXi::Ones(2);
  CHECK_THROWS_AS(influence_from_scores(y, d, MatrixXd::Ones(2, 1)), Error);
  CHECK_THROWS_AS(influence_from_scores(y.head(1), d, MatrixXd::Ones(2, 1)), Error);
}

TEST_CASE("covariance modes and degenerate columns") {
  std::mt19937_64 rng(4);
  Sample s = sorted_sample(50, 6, 0.3, false, rng);
  const InfluenceTable t = compute_influence(s.y, s.delta, s.phi, s.y, VectorXd::Zero(6));
  const MatrixXd m = testing::gaussian_matrix(6, 6, rng);
  const CovarianceEstimate full = covariance_from_influence(t, CovarianceMode::Full, &m);
  const CovarianceEstimate diag = covariance_from_influence(t, CovarianceMode::DiagOnly, &m);
  REQUIRE(full.sigma.has_value());
  CHECK(!diag.sigma.has_value());
  const MatrixXd& sigma = *full.sigma;
  CHECK(sigma == sigma.transpose());
  CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(sigma).eigenvalues().minCoeff() > -1e-8);
  for (Index j = 0; j < 6; ++j) {
    const double direct = m.row(j).dot(sigma * m.row(j).transpose());
    CHECK(std::abs(diag.lambda_diag[j] - direct) < 1e-10 * std::max(1.0, direct));
    CHECK(diag.lambda_diag[j] >= 0.0);
  }
  const MatrixXd zc = t.zeta.rowwise() - t.zeta.colwise().mean();
  CHECK(sigma.isApprox(zc.transpose() * zc / 49.0, 1e-12));

  InfluenceTable constant;
  constant.zeta = MatrixXd::Constant(10, 3, 2.5);
  constant.tau0 = VectorXd::Ones(10);
  const MatrixXd eye = MatrixXd::Identity(3, 3);
  const CovarianceEstimate c = covariance_from_influence(constant, CovarianceMode::Full, &eye);
  CHECK(c.sigma->isZero());
  CHECK(c.lambda_diag.isZero());

  InfluenceTable tiny;
  tiny.zeta = MatrixXd::Ones(1, 2);
  tiny.tau0 = VectorXd::Ones(1);
  CHECK_THROWS_AS(covariance_from_influence(tiny, CovarianceMode::Full), Error);
}

TEST_CASE("scale equivariance") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    Sample s = sorted_sample(40, 4, 0.3, false, rng);
    const VectorXd theta = VectorXd::Random(4);
    const double c = 3.7;
    const InfluenceTable a = compute_influence(s.y, s.delta, s.phi, s.y, theta);
    const InfluenceTable b = compute_influence(s.y, s.delta, s.phi, c * s.y, c * theta);
    CHECK((b.zeta - c * a.zeta).cwiseAbs().maxCoeff() < 1e-10);
    const MatrixXd m = MatrixXd::Identity(4, 4);
    const VectorXd la = lambda_diagonal(a, m);
    const VectorXd lb = lambda_diagonal(b, m);
    CHECK((lb - c * c * la).cwiseAbs().maxCoeff() < 1e-9);
  }
}
