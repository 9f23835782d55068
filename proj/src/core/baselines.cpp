#include "hierfdr/baselines.hpp"

#include "hierfdr/error.hpp"
#include "hierfdr/influence_cov.hpp"
#include "hierfdr/km_weights.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hierfdr {

bool is_testable(const IndexMap& map, Index l) { return !map.is_env(l); }

std::vector<Index> restrict_to_testable(const IndexMap& map, const std::vector<Index>& indices) {
  std::vector<Index> out;
  for (Index l : indices) {
    if (is_testable(map, l)) out.push_back(l);
  }
  return out;
}

std::vector<Index> baseline_bh(std::span<const double> pvalues, double alpha) {
  for (double pv : pvalues) {
    if (!(pv >= 0.0 && pv <= 1.0)) fail(ErrorCode::InvalidArgument, "p-values must lie in [0, 1]");
  }
  const std::size_t m = pvalues.size();
  std::vector<Index> order(m);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return pvalues[static_cast<std::size_t>(a)] < pvalues[static_cast<std::size_t>(b)];
  });
  std::size_t cut = 0;
  for (std::size_t k = 1; k <= m; ++k) {
    if (pvalues[static_cast<std::size_t>(order[k - 1])] <= alpha * static_cast<double>(k) / static_cast<double>(m)) cut = k;
  }
  std::vector<Index> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::vector<Index> bh_subset(std::span<const double> pvalues, const std::vector<Index>& subset, double alpha) {
  std::vector<double> sub;
  sub.reserve(subset.size());
  for (Index l : subset) sub.push_back(pvalues[static_cast<std::size_t>(l)]);
  std::vector<Index> out;
  for (Index pos : baseline_bh(sub, alpha)) out.push_back(subset[static_cast<std::size_t>(pos)]);
  return out;
}

}  // namespace

RejectionResult baseline_bh_hierarchy(std::span<const double> pvalues, const IndexMap& map, double alpha,
                                      BhHierarchyMode mode) {
  if (static_cast<Index>(pvalues.size()) != map.p()) fail(ErrorCode::DimensionMismatch, "p-value count differs from p");
  std::vector<Index> mains(static_cast<std::size_t>(map.d()));
  std::iota(mains.begin(), mains.end(), Index{0});
  RejectionResult out;
  out.t0 = std::nan("");
  out.main_effects = bh_subset(pvalues, mains, alpha);
  auto block = [&](Index j) {
    std::vector<Index> ks;
    for (Index k = 0; k < map.q(); ++k) ks.push_back(map.interaction_begin(j) + k);
    return ks;
  };
  if (mode == BhHierarchyMode::Pooled) {
    std::vector<Index> tested;
    for (Index j : out.main_effects) {
      const auto ks = block(j);
      tested.insert(tested.end(), ks.begin(), ks.end());
    }
    for (Index l : bh_subset(pvalues, tested, alpha)) out.interactions[map.decode(l).main].push_back(l);
  } else {
    for (Index j : out.main_effects) {
      auto rej = bh_subset(pvalues, block(j), alpha);
      if (!rej.empty()) out.interactions.emplace(j, std::move(rej));
    }
  }
  return out;
}

std::vector<Index> baseline_bh_flat(std::span<const double> pvalues, const IndexMap& map, double alpha) {
  if (static_cast<Index>(pvalues.size()) != map.p()) fail(ErrorCode::DimensionMismatch, "p-value count differs from p");
  std::vector<Index> testable;
  for (Index l = 0; l < map.p(); ++l) {
    if (is_testable(map, l)) testable.push_back(l);
  }
  return bh_subset(pvalues, testable, alpha);
}

MarginalPValues marginal_wls_pvalues(const SortedDataset& sorted) {
  const SurvivalDataset& data = sorted.dataset;
  const MatrixXd& phi = sorted.design.phi;
  const Index n = data.n();
  const Index p = phi.cols();
  const KmWeights weights = compute_km_weights(sorted);
  const VectorXd& w = weights.w;
  const double total = w.sum();
  if (!(total > 0.0)) fail(ErrorCode::InvalidArgument, "all observations are censored");

  const VectorXd means = phi.transpose() * w / total;
  const MatrixXd xc = phi.rowwise() - means.transpose();
  const VectorXd yc = data.y().array() - w.dot(data.y()) / total;
  const VectorXd gamma = xc.array().square().matrix().transpose() * w;
  const VectorXd cross = xc.transpose() * w.cwiseProduct(yc);

  MarginalPValues out;
  out.pvalues = VectorXd::Ones(p);
  out.degenerate.assign(static_cast<std::size_t>(p), 0);
  VectorXd slope = VectorXd::Zero(p);
  const double scale = gamma.size() > 0 ? gamma.maxCoeff() : 0.0;
  for (Index l = 0; l < p; ++l) {
    if (gamma[l] > 1e-14 * std::max(scale, 1.0)) {
      slope[l] = cross[l] / gamma[l];
    } else {
      out.degenerate[static_cast<std::size_t>(l)] = 1;
    }
  }
  // scores(i, l) = x_il (y_i - x_il b_l)
  MatrixXd scores(n, p);
  for (Index l = 0; l < p; ++l) {
    scores.col(l) = xc.col(l).cwiseProduct(yc - slope[l] * xc.col(l));
  }
  const InfluenceTable table = influence_from_scores(data.y(), data.status(), scores);
  const MatrixXd zc = table.zeta.rowwise() - table.zeta.colwise().mean();
  const VectorXd var = zc.colwise().squaredNorm().transpose() / static_cast<double>(n - 1);
  const double root_n = std::sqrt(static_cast<double>(n));
  for (Index l = 0; l < p; ++l) {
    if (out.degenerate[static_cast<std::size_t>(l)]) continue;
    if (!(var[l] > 0.0)) {
      // An exact fit with a nonzero slope has no sampling noise left.
      if (slope[l] != 0.0) {
        out.pvalues[l] = 0.0;
      } else {
        out.degenerate[static_cast<std::size_t>(l)] = 1;
      }
      continue;
    }
    const double z = root_n * slope[l] * gamma[l] / std::sqrt(var[l]);
    out.pvalues[l] = std::min(1.0, gaussian_tail(std::abs(z)));
  }
  out.slopes = std::move(slope);
  return out;
}

FlatRejection baseline_fcd(const TestStatistics& stats, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in [0, 1)");
  const Index p = stats.p();
  const double t_p = search_upper_bound(p);
  std::vector<double> mags;
  std::vector<double> candidates{0.0, t_p};
  for (Index j = 0; j < p; ++j) {
    const double m = stats.magnitude(j);
    if (m < 0.0) continue;
    mags.push_back(m);
    if (m <= t_p) candidates.push_back(m);
  }
  std::sort(mags.begin(), mags.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  FlatRejection out;
  out.t = std::sqrt(2.0 * std::log(static_cast<double>(p)));
  out.fallback_used = true;
  for (double t : candidates) {
    const auto r = static_cast<double>(mags.end() - std::lower_bound(mags.begin(), mags.end(), t));
    if (static_cast<double>(p) * gaussian_tail(t) / std::max(r, 1.0) <= alpha) {
      out.t = t;
      out.fallback_used = false;
      break;
    }
  }
  for (Index j = 0; j < p; ++j) {
    if (stats.magnitude(j) >= out.t) out.selected.push_back(j);
  }
  return out;
}

std::vector<Index> baseline_vs_support(const VectorXd& theta, double zero_tol) {
  std::vector<Index> out;
  for (Index j = 0; j < theta.size(); ++j) {
    if (std::abs(theta[j]) > zero_tol) out.push_back(j);
  }
  return out;
}

namespace {

// t with G(t) = level, by bisection on the monotone tail.
double two_sided_quantile(double level) {
  double lo = 0.0;
  double hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (gaussian_tail(mid) > level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<Index> baseline_vs_debiased(const TestStatistics& stats, double level) {
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::InvalidArgument, "level must lie in (0, 1)");
  const double cut = two_sided_quantile(level);
  std::vector<Index> out;
  for (Index j = 0; j < stats.p(); ++j) {
    if (stats.magnitude(j) >= cut) out.push_back(j);
  }
  return out;
}

}  // namespace hierfdr
