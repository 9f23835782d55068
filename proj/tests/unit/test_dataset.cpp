#include "helpers.hpp"

#include "hierfdr/dataset.hpp"
#include "hierfdr/error.hpp"
#include "hierfdr/km_weights.hpp"

#include <doctest.h>

#include <numeric>

using namespace hierfdr;

TEST_CASE("augmented design dimensions") {
  CHECK(IndexMap(200, 5).p() == 1205);
  CHECK(IndexMap(100, 5).p() == 605);
}

TEST_CASE("interaction column is the product of its parents") {
  MatrixXd x(2, 1);
  x << 1, 2;
  MatrixXd z(2, 1);
  z << 3, 4;
  const AugmentedDesign design = build_augmented_design(x, z);
  REQUIRE(design.phi.cols() == 3);
  CHECK(design.phi(0, 2) == 3.0);
  CHECK(design.phi(1, 2) == 8.0);
}

TEST_CASE("interaction columns match exact Hadamard products") {
  std::mt19937_64 rng(3);
  const MatrixXd x = testing::gaussian_matrix(20, 7, rng);
  const MatrixXd z = testing::gaussian_matrix(20, 3, rng);
  const AugmentedDesign design = build_augmented_design(x, z);
  const IndexMap& map = design.index_map;
  for (Index j = 0; j < 7; ++j) {
    for (Index k = 0; k < 3; ++k) {
      const Index l = map.encode(EffectRole::Interaction(j, k));
      CHECK(l == 7 + 3 + j * 3 + k);
      for (Index i = 0; i < 20; ++i) CHECK(design.phi(i, l) == x(i, j) * z(i, k));
    }
    CHECK(design.phi.col(map.encode(EffectRole::Main(j))) == x.col(j));
  }
  for (Index k = 0; k < 3; ++k) CHECK(design.phi.col(map.encode(EffectRole::Env(k))) == z.col(k));
}

TEST_CASE("index map round-trips") {
  const IndexMap map(9, 4);
  for (Index l = 0; l < map.p(); ++l) CHECK(map.encode(map.decode(l)) == l);
  for (Index j = 0; j < 9; ++j) {
    CHECK(map.decode(map.encode(EffectRole::Main(j))) == EffectRole::Main(j));
    for (Index k = 0; k < 4; ++k) {
      const EffectRole r = EffectRole::Interaction(j, k);
      CHECK(map.decode(map.encode(r)) == r);
    }
  }
  CHECK(map.interaction_begin(2) == 9 + 4 + 8);
  CHECK_THROWS_AS(map.decode(map.p()), Error);
  CHECK(map.label(0) == "G1");
  CHECK(map.label(9) == "E1");
  CHECK(map.label(map.encode(EffectRole::Interaction(1, 2))) == "G2:E3");
}

TEST_CASE("row count mismatch between X and Z") {
  CHECK_THROWS_AS(build_augmented_design(MatrixXd::Zero(3, 2), MatrixXd::Zero(4, 1)), Error);
}

TEST_CASE("dataset validation") {
  VectorXd y(2);
  y << 1, 2;
  VectorXi bad(2);
  bad << 1, 2;
  CHECK_THROWS_AS(SurvivalDataset(y, bad, MatrixXd::Zero(2, 1), MatrixXd::Zero(2, 1)), Error);
  VectorXi ok(2);
  ok << 1, 0;
  CHECK_THROWS_AS(SurvivalDataset(y, ok, MatrixXd::Zero(3, 1), MatrixXd::Zero(2, 1)), Error);
  CHECK_NOTHROW(SurvivalDataset(y, ok, MatrixXd::Zero(2, 1), MatrixXd::Zero(2, 1)));
}

TEST_CASE("sorting by time") {
  VectorXd y(3);
  y << 3, 1, 2;
  VectorXi s = VectorXi::Ones(3);
  const SurvivalDataset data(y, s, MatrixXd::Identity(3, 1), MatrixXd::Ones(3, 1));
  const SortedDataset sorted = sort_by_time(data);
  CHECK(sorted.permutation == std::vector<Index>{1, 2, 0});
  CHECK(sorted.dataset.y()[0] == 1.0);
  CHECK(sorted.dataset.y()[2] == 3.0);
  CHECK(sorted.design.phi(2, 0) == 1.0);  // row of the original first observation
}

TEST_CASE("tied times put events first") {
  VectorXd y(2);
  y << 2, 2;
  VectorXi s(2);
  s << 0, 1;
  const SurvivalDataset data(y, s, MatrixXd::Zero(2, 1), MatrixXd::Zero(2, 1));
  const SortedDataset sorted = sort_by_time(data);
  CHECK(sorted.dataset.status()[0] == 1);
  CHECK(sorted.permutation == std::vector<Index>{1, 0});
  // Same answer regardless of the input order.
  const SortedDataset again = sort_by_time(data.permuted({1, 0}));
  CHECK(again.dataset.status()[0] == 1);
}

TEST_CASE("sorted input keeps the identity permutation and sorting is stable") {
  std::mt19937_64 rng(9);
  SurvivalDataset data = testing::random_dataset(30, 3, 2, 0.3, rng);
  const SortedDataset first = sort_by_time(data);
  const SortedDataset twice = sort_by_time(first.dataset);
  std::vector<Index> identity(30);
  std::iota(identity.begin(), identity.end(), Index{0});
  CHECK(twice.permutation == identity);
  CHECK(sort_by_time(data).permutation == first.permutation);
  for (Index i = 1; i < 30; ++i) CHECK(first.dataset.y()[i - 1] <= first.dataset.y()[i]);
}

TEST_CASE("weighted centering") {
  MatrixXd x(3, 1);
  x << 1, 2, 3;
  AugmentedDesign design = build_augmented_design(x, MatrixXd::Ones(3, 1));
  const VectorXd y = VectorXd::LinSpaced(3, 0, 2);
  const CenteredDesign uniform = center_columns(design, y, VectorXd::Constant(3, 1.0 / 3));
  CHECK(uniform.design.phi(0, 0) == doctest::Approx(-1.0));
  CHECK(uniform.design.phi(1, 0) == doctest::Approx(0.0));
  CHECK(uniform.design.phi(2, 0) == doctest::Approx(1.0));
  CHECK(uniform.y.sum() == doctest::Approx(0.0));

  MatrixXd x2(3, 1);
  x2 << 5, 9, 9;
  const CenteredDesign point = center_columns(build_augmented_design(x2, MatrixXd::Ones(3, 1)), y,
                                              (VectorXd(3) << 1, 0, 0).finished());
  CHECK(point.design.phi(0, 0) == 0.0);
  CHECK(point.design.phi(1, 0) == 4.0);
  CHECK(point.design.phi(2, 0) == 4.0);

  CHECK_THROWS_AS(center_columns(design, y, VectorXd::Zero(3)), Error);
}

TEST_CASE("KM-weighted centering of an uncensored sample is uniform centering") {
  std::mt19937_64 rng(5);
  const SurvivalDataset data = testing::random_dataset(25, 4, 2, 0.0, rng);
  const SortedDataset sorted = sort_by_time(data);
  const KmWeights w = compute_km_weights(sorted);
  const CenteredDesign km = center_columns(sorted.design, sorted.dataset.y(), w.w);
  const CenteredDesign uni = center_columns(sorted.design, sorted.dataset.y(), VectorXd::Constant(25, 1.0));
  CHECK((km.design.phi - uni.design.phi).cwiseAbs().maxCoeff() < 1e-12);
  const VectorXd means = km.design.phi.transpose() * w.w;
  CHECK(means.cwiseAbs().maxCoeff() < 1e-10 * (1 + sorted.design.phi.cwiseAbs().maxCoeff()));
}
