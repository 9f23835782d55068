#include "helpers.hpp"

#include "hierfdr/baselines.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace hierfdr;

namespace {

TestStatistics make_stats(const VectorXd& u, Index d, Index q) {
  TestStatistics s;
  s.u = u;
  s.valid.assign(static_cast<std::size_t>(u.size()), 1);
  s.n = 100;
  s.index_map = IndexMap(d, q);
  return s;
}

}  // namespace

TEST_CASE("benjamini-hochberg step-up") {
  const std::vector<double> ones(100, 1.0);
  CHECK(baseline_bh(ones, 0.1).empty());
  std::vector<double> one_small = ones;
  one_small[37] = 0.001;
  CHECK(baseline_bh(one_small, 0.1) == std::vector<Index>{37});
  one_small[37] = 0.0011;
  CHECK(baseline_bh(one_small, 0.1).empty());
  const std::vector<double> four{0.01, 0.02, 0.9, 1.0};
  CHECK(baseline_bh(four, 0.1) == std::vector<Index>{0, 1});
  // Step-up: 0.025 fails at rank 2 but the larger 0.028 passes at rank 3.
  const std::vector<double> step{0.028, 0.01, 0.025, 0.5, 0.9};
  CHECK(baseline_bh(step, 0.05) == std::vector<Index>{0, 1, 2});
  const std::vector<double> bad{0.5, 1.2};
  CHECK_THROWS_AS(baseline_bh(bad, 0.1), Error);
  const std::vector<double> negative{-0.1};
  CHECK_THROWS_AS(baseline_bh(negative, 0.1), Error);
  CHECK(baseline_bh(std::vector<double>{}, 0.1).empty());
}

TEST_CASE("hierarchical BH") {
  const IndexMap map(4, 2);
  std::vector<double> pv(static_cast<std::size_t>(map.p()), 0.9);
  pv[0] = 1e-4;
  pv[2] = 1e-4;
  pv[static_cast<std::size_t>(map.interaction_begin(0) + 1)] = 1e-4;
  pv[static_cast<std::size_t>(map.interaction_begin(1))] = 1e-6;  // parent 1 not rejected
  pv[static_cast<std::size_t>(map.interaction_begin(2))] = 0.03;
  const RejectionResult pooled = baseline_bh_hierarchy(pv, map, 0.1);
  CHECK(pooled.main_effects == std::vector<Index>{0, 2});
  // Pooled over the four interactions of mains 0 and 2: 0.03 <= 2 * 0.1 / 4.
  REQUIRE(pooled.interactions.count(0) == 1);
  CHECK(pooled.interactions.at(0) == std::vector<Index>{map.interaction_begin(0) + 1});
  CHECK(pooled.interactions.at(2) == std::vector<Index>{map.interaction_begin(2)});
  CHECK(pooled.interactions.count(1) == 0);

  // Within main 2's block alone 0.03 <= 0.1 / 2; raised to 0.06 it fails.
  const RejectionResult family = baseline_bh_hierarchy(pv, map, 0.1, BhHierarchyMode::PerFamily);
  CHECK(family.interactions.count(2) == 1);
  pv[static_cast<std::size_t>(map.interaction_begin(2))] = 0.06;
  const RejectionResult family2 = baseline_bh_hierarchy(pv, map, 0.1, BhHierarchyMode::PerFamily);
  CHECK(family2.interactions.count(2) == 0);

  CHECK_THROWS_AS(baseline_bh_hierarchy(std::vector<double>(3, 0.5), map, 0.1), Error);

  const std::vector<Index> flat = baseline_bh_flat(pv, map, 0.1);
  for (Index l : flat) CHECK(is_testable(map, l));
}

TEST_CASE("testable hypotheses exclude environment effects") {
  const IndexMap map(3, 2);
  CHECK(is_testable(map, 0));
  CHECK(!is_testable(map, 3));
  CHECK(!is_testable(map, 4));
  CHECK(is_testable(map, 5));
  CHECK(restrict_to_testable(map, {0, 3, 4, 8}) == std::vector<Index>{0, 8});
}

TEST_CASE("marginal p-values on noise are uniform") {
  std::mt19937_64 rng(21);
  std::vector<double> pv;
  for (int rep = 0; rep < 300; ++rep) {
    const SurvivalDataset data = testing::random_dataset(200, 1, 1, 0.25, rng);
    const MarginalPValues m = marginal_wls_pvalues(sort_by_time(data));
    pv.push_back(m.pvalues[0]);
  }
  std::sort(pv.begin(), pv.end());
  double ks = 0.0;
  const double k = static_cast<double>(pv.size());
  for (std::size_t i = 0; i < pv.size(); ++i) {
    ks = std::max({ks, std::abs((static_cast<double>(i) + 1) / k - pv[i]), std::abs(static_cast<double>(i) / k - pv[i])});
  }
  CHECK(ks < 0.1);
}

TEST_CASE("marginal p-values for an exact copy and a zero column") {
  std::mt19937_64 rng(22);
  const SurvivalDataset base = testing::random_dataset(200, 3, 1, 0.0, rng);
  MatrixXd x = base.x();
  x.col(0) = base.y();
  x.col(1).setZero();
  const SurvivalDataset data(base.y(), base.status(), x, base.z());
  const MarginalPValues m = marginal_wls_pvalues(sort_by_time(data));
  CHECK(m.pvalues[0] < 1e-6);
  CHECK(m.slopes[0] == doctest::Approx(1.0));
  CHECK(!m.degenerate[0]);
  CHECK(m.pvalues[1] == 1.0);
  CHECK(m.degenerate[1]);

  // A strong but noisy copy is still tiny.
  MatrixXd x2 = base.x();
  x2.col(0) = base.y() + 0.1 * testing::gaussian_matrix(200, 1, rng);
  const MarginalPValues m2 = marginal_wls_pvalues(sort_by_time(SurvivalDataset(base.y(), base.status(), x2, base.z())));
  CHECK(m2.pvalues[0] < 1e-6);
}

TEST_CASE("flat threshold rule") {
  const IndexMap map(200, 5);
  const TestStatistics zero = make_stats(VectorXd::Zero(map.p()), 200, 5);
  const FlatRejection none = baseline_fcd(zero, 0.1);
  CHECK(none.fallback_used);
  CHECK(none.selected.empty());

  VectorXd u = VectorXd::Zero(map.p());
  u[map.interaction_begin(7) + 3] = 50.0;
  const FlatRejection huge = baseline_fcd(make_stats(u, 200, 5), 0.1);
  CHECK(huge.selected == std::vector<Index>{map.interaction_begin(7) + 3});

  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 20; ++rep) {
    VectorXd v(map.p());
    for (Index l = 0; l < map.p(); ++l) v[l] = normal(rng);
    for (Index j = 0; j < 10; ++j) {
      v[j] = 5.0 + normal(rng);
      v[map.interaction_begin(j) + 1] = 4.0 + normal(rng);
      v[map.interaction_begin(j + 50) + 2] = 4.5;  // orphan interactions
    }
    const TestStatistics s = make_stats(v, 200, 5);
    const FlatRejection flat = baseline_fcd(s, 0.1);
    const std::vector<Index> hier = reject_at(s, flat.t).selected();
    CHECK(std::includes(flat.selected.begin(), flat.selected.end(), hier.begin(), hier.end()));
  }
}

TEST_CASE("variable-selection baselines") {
  CHECK(baseline_vs_support(VectorXd::Zero(5)).empty());
  const VectorXd theta = (VectorXd(4) << 0.0, 1e-9, -2.0, 0.0).finished();
  CHECK(baseline_vs_support(theta) == std::vector<Index>{1, 2});
  CHECK(baseline_vs_support(theta, 1e-6) == std::vector<Index>{2});

  const IndexMap map(3, 1);
  const VectorXd below = VectorXd::Constant(map.p(), 1.9);
  CHECK(baseline_vs_debiased(make_stats(below, 3, 1)).empty());
  VectorXd some = below;
  some[1] = -1.96;
  CHECK(baseline_vs_debiased(make_stats(some, 3, 1)) == std::vector<Index>{1});
  CHECK_THROWS_AS(baseline_vs_debiased(make_stats(some, 3, 1), 0.0), Error);
}
