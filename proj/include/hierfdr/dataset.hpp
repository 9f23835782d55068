#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace hierfdr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

/// Right-censored observations: log-times y, event indicators (1 = event
/// observed, 0 = censored), high-dimensional covariates X (n x d) and
/// low-dimensional covariates Z (n x q). Validated on construction.
class SurvivalDataset {
 public:
  SurvivalDataset(VectorXd y, VectorXi status, MatrixXd x, MatrixXd z,
                  std::vector<std::string> x_names = {}, std::vector<std::string> z_names = {});

  Index n() const { return y_.size(); }
  Index d() const { return x_.cols(); }
  Index q() const { return z_.cols(); }

  const VectorXd& y() const { return y_; }
  const VectorXi& status() const { return status_; }
  const MatrixXd& x() const { return x_; }
  const MatrixXd& z() const { return z_; }
  const std::vector<std::string>& x_names() const { return x_names_; }
  const std::vector<std::string>& z_names() const { return z_names_; }

  /// Rows reordered so that row i of the result is row order[i] of this.
  SurvivalDataset permuted(const std::vector<Index>& order) const;

 private:
  VectorXd y_;
  VectorXi status_;
  MatrixXd x_;
  MatrixXd z_;
  std::vector<std::string> x_names_;
  std::vector<std::string> z_names_;
};

enum class EffectKind { Main, Env, Interaction };

/// What a coefficient of the augmented model stands for. Indices are 0-based:
/// `main` indexes columns of X, `env` columns of Z.
struct EffectRole {
  EffectKind kind = EffectKind::Main;
  Index main = -1;
  Index env = -1;

  static EffectRole Main(Index j) { return {EffectKind::Main, j, -1}; }
  static EffectRole Env(Index k) { return {EffectKind::Env, -1, k}; }
  static EffectRole Interaction(Index j, Index k) { return {EffectKind::Interaction, j, k}; }

  friend bool operator==(const EffectRole&, const EffectRole&) = default;
};

/// Bijection between coefficient positions and effect roles. Layout (0-based):
///   [0, d)                    main effects of X
///   [d, d + q)                main effects of Z
///   d + q + j*q + k           interaction X_j * Z_k
/// which is the 1-based layout l = d + j q + k shifted down by one.
class IndexMap {
 public:
  IndexMap(Index d, Index q);

  Index d() const { return d_; }
  Index q() const { return q_; }
  Index p() const { return d_ + (d_ + 1) * q_; }

  Index encode(const EffectRole& role) const;
  EffectRole decode(Index l) const;

  /// First position of the q interaction coefficients belonging to main j.
  Index interaction_begin(Index j) const { return d_ + q_ + j * q_; }
  bool is_main(Index l) const { return l < d_; }
  bool is_env(Index l) const { return l >= d_ && l < d_ + q_; }

  /// Human-readable label, e.g. "G12", "E2", "G12:E2"; uses column names when given.
  std::string label(Index l, const std::vector<std::string>& x_names = {},
                    const std::vector<std::string>& z_names = {}) const;

 private:
  Index d_;
  Index q_;
};

struct AugmentedDesign {
  MatrixXd phi;  // n x p, dense
  IndexMap index_map;
};

AugmentedDesign build_augmented_design(const MatrixXd& x, const MatrixXd& z);
AugmentedDesign build_augmented_design(const SurvivalDataset& data);

/// Ordering by ascending y; at tied y the events come before censored rows,
/// remaining ties keep the original order.
std::vector<Index> time_order(const VectorXd& y, const VectorXi& status);

struct SortedDataset {
  SurvivalDataset dataset;
  std::vector<Index> permutation;  // permutation[i] = original row of sorted row i
  AugmentedDesign design;
};

SortedDataset sort_by_time(const SurvivalDataset& data, const AugmentedDesign& design);
SortedDataset sort_by_time(const SurvivalDataset& data);

struct CenteredDesign {
  AugmentedDesign design;
  VectorXd y;
  VectorXd column_means;
  double y_mean = 0.0;
};

/// Subtracts weighted column means (and the weighted mean of y). Weights must
/// be non-negative with a positive sum.
CenteredDesign center_columns(const AugmentedDesign& design, const VectorXd& y, const VectorXd& weights);

}  // namespace hierfdr
