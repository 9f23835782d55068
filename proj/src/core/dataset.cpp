#include "hierfdr/dataset.hpp"

#include "hierfdr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hierfdr {

SurvivalDataset::SurvivalDataset(VectorXd y, VectorXi status, MatrixXd x, MatrixXd z, std::vector<std::string> x_names,
                                 std::vector<std::string> z_names)
    : y_(std::move(y)),
      status_(std::move(status)),
      x_(std::move(x)),
      z_(std::move(z)),
      x_names_(std::move(x_names)),
      z_names_(std::move(z_names)) {
  const Index n = y_.size();
  if (status_.size() != n || x_.rows() != n || z_.rows() != n) {
    std::ostringstream os;
    os << "row counts differ: y=" << n << " status=" << status_.size() << " X=" << x_.rows() << " Z=" << z_.rows();
    fail(ErrorCode::DimensionMismatch, os.str());
  }
  if (n < 2) fail(ErrorCode::InvalidArgument, "need at least two observations");
  if (x_.cols() < 1 || z_.cols() < 1) fail(ErrorCode::InvalidArgument, "need d >= 1 and q >= 1");
  for (Index i = 0; i < n; ++i) {
    if (status_[i] != 0 && status_[i] != 1) {
      fail(ErrorCode::InvalidArgument, "status must be 0 or 1 (row " + std::to_string(i + 1) + ")");
    }
    if (!std::isfinite(y_[i])) fail(ErrorCode::InvalidArgument, "non-finite time at row " + std::to_string(i + 1));
  }
  if (!x_.allFinite() || !z_.allFinite()) fail(ErrorCode::InvalidArgument, "non-finite covariate value");
  if (!x_names_.empty() && static_cast<Index>(x_names_.size()) != x_.cols()) {
    fail(ErrorCode::DimensionMismatch, "x_names length does not match d");
  }
  if (!z_names_.empty() && static_cast<Index>(z_names_.size()) != z_.cols()) {
    fail(ErrorCode::DimensionMismatch, "z_names length does not match q");
  }
}

SurvivalDataset SurvivalDataset::permuted(const std::vector<Index>& order) const {
  const Index n = this->n();
  if (static_cast<Index>(order.size()) != n) fail(ErrorCode::DimensionMismatch, "permutation length differs from n");
  VectorXd y(n);
  VectorXi s(n);
  MatrixXd x(n, d());
  MatrixXd z(n, q());
  for (Index i = 0; i < n; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    y[i] = y_[src];
    s[i] = status_[src];
    x.row(i) = x_.row(src);
    z.row(i) = z_.row(src);
  }
  return SurvivalDataset(std::move(y), std::move(s), std::move(x), std::move(z), x_names_, z_names_);
}

IndexMap::IndexMap(Index d, Index q) : d_(d), q_(q) {
  if (d < 1 || q < 1) fail(ErrorCode::InvalidArgument, "index map needs d >= 1 and q >= 1");
}

Index IndexMap::encode(const EffectRole& role) const {
  switch (role.kind) {
    case EffectKind::Main:
      if (role.main < 0 || role.main >= d_) break;
      return role.main;
    case EffectKind::Env:
      if (role.env < 0 || role.env >= q_) break;
      return d_ + role.env;
    case EffectKind::Interaction:
      if (role.main < 0 || role.main >= d_ || role.env < 0 || role.env >= q_) break;
      return interaction_begin(role.main) + role.env;
  }
  fail(ErrorCode::InvalidArgument, "effect role out of range");
}

EffectRole IndexMap::decode(Index l) const {
  if (l < 0 || l >= p()) fail(ErrorCode::InvalidArgument, "coefficient index out of range");
  if (l < d_) return EffectRole::Main(l);
  if (l < d_ + q_) return EffectRole::Env(l - d_);
  const Index off = l - d_ - q_;
  return EffectRole::Interaction(off / q_, off % q_);
}

std::string IndexMap::label(Index l, const std::vector<std::string>& x_names,
                            const std::vector<std::string>& z_names) const {
  auto xn = [&](Index j) {
    return x_names.empty() ? "G" + std::to_string(j + 1) : x_names[static_cast<std::size_t>(j)];
  };
  auto zn = [&](Index k) {
    return z_names.empty() ? "E" + std::to_string(k + 1) : z_names[static_cast<std::size_t>(k)];
  };
  const EffectRole role = decode(l);
  switch (role.kind) {
    case EffectKind::Main: return xn(role.main);
    case EffectKind::Env: return zn(role.env);
    case EffectKind::Interaction: return xn(role.main) + ":" + zn(role.env);
  }
  return {};
}

AugmentedDesign build_augmented_design(const MatrixXd& x, const MatrixXd& z) {
  if (x.rows() != z.rows()) {
    fail(ErrorCode::DimensionMismatch,
         "X has " + std::to_string(x.rows()) + " rows but Z has " + std::to_string(z.rows()));
  }
  const IndexMap map(x.cols(), z.cols());
  const Index d = map.d();
  const Index q = map.q();
  MatrixXd phi(x.rows(), map.p());
  phi.leftCols(d) = x;
  phi.middleCols(d, q) = z;
  for (Index j = 0; j < d; ++j) {
    const Index base = map.interaction_begin(j);
    for (Index k = 0; k < q; ++k) phi.col(base + k) = x.col(j).cwiseProduct(z.col(k));
  }
  return {std::move(phi), map};
}

AugmentedDesign build_augmented_design(const SurvivalDataset& data) { return build_augmented_design(data.x(), data.z()); }

std::vector<Index> time_order(const VectorXd& y, const VectorXi& status) {
  std::vector<Index> order(static_cast<std::size_t>(y.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (y[a] != y[b]) return y[a] < y[b];
    return status[a] > status[b];
  });
  return order;
}

SortedDataset sort_by_time(const SurvivalDataset& data, const AugmentedDesign& design) {
  if (design.phi.rows() != data.n()) fail(ErrorCode::DimensionMismatch, "design rows differ from dataset size");
  std::vector<Index> order = time_order(data.y(), data.status());
  MatrixXd phi(design.phi.rows(), design.phi.cols());
  for (std::size_t i = 0; i < order.size(); ++i) phi.row(static_cast<Index>(i)) = design.phi.row(order[i]);
  SurvivalDataset sorted = data.permuted(order);
  return {std::move(sorted), std::move(order), AugmentedDesign{std::move(phi), design.index_map}};
}

SortedDataset sort_by_time(const SurvivalDataset& data) { return sort_by_time(data, build_augmented_design(data)); }

CenteredDesign center_columns(const AugmentedDesign& design, const VectorXd& y, const VectorXd& weights) {
  const Index n = design.phi.rows();
  if (weights.size() != n || y.size() != n) fail(ErrorCode::DimensionMismatch, "weights/response length differs from n");
  if ((weights.array() < 0.0).any()) fail(ErrorCode::InvalidArgument, "centering weights must be non-negative");
  const double total = weights.sum();
  if (!(total > 0.0)) fail(ErrorCode::InvalidArgument, "centering weights are all zero");
  const VectorXd means = design.phi.transpose() * weights / total;
  const double y_mean = weights.dot(y) / total;
  CenteredDesign out{AugmentedDesign{design.phi.rowwise() - means.transpose(), design.index_map},
                     y.array() - y_mean, means, y_mean};
  return out;
}

}  // namespace hierfdr
