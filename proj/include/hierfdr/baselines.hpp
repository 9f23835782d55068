#pragma once

#include "hierfdr/dataset.hpp"
#include "hierfdr/hfdr.hpp"

#include <span>
#include <vector>

namespace hierfdr {

/// Hypotheses that enter FDR bookkeeping: every main effect of X and every
/// interaction. Main effects of Z are always kept in the model and are not
/// tested.
bool is_testable(const IndexMap& map, Index l);
std::vector<Index> restrict_to_testable(const IndexMap& map, const std::vector<Index>& indices);

/// Benjamini-Hochberg step-up; returns rejected positions of `pvalues`, ascending.
std::vector<Index> baseline_bh(std::span<const double> pvalues, double alpha);

enum class BhHierarchyMode {
  Pooled,     // one BH over all interactions of rejected mains
  PerFamily,  // separate BH within each rejected main's interaction block
};

/// BH over main-effect p-values, then BH over interactions of rejected mains.
RejectionResult baseline_bh_hierarchy(std::span<const double> pvalues, const IndexMap& map, double alpha,
                                      BhHierarchyMode mode = BhHierarchyMode::Pooled);

/// BH over all testable hypotheses, ignoring the hierarchy.
std::vector<Index> baseline_bh_flat(std::span<const double> pvalues, const IndexMap& map, double alpha);

struct MarginalPValues {
  VectorXd pvalues;
  std::vector<char> degenerate;  // zero weighted variance; p-value set to 1
  VectorXd slopes;
};

/// Univariable KM-weighted least-squares slope for every column of the sorted
/// design, with its variance from the influence representation specialised to
/// one covariate. Two-sided normal p-values.
MarginalPValues marginal_wls_pvalues(const SortedDataset& sorted);

struct FlatRejection {
  double t = 0.0;
  bool fallback_used = false;
  std::vector<Index> selected;
};

/// Non-hierarchical analogue of the threshold rule: smallest t with
/// p G(t) / max(R(t), 1) <= alpha where R counts all valid statistics.
FlatRejection baseline_fcd(const TestStatistics& stats, double alpha);

/// Support of a penalized fit (nonzero coordinates).
std::vector<Index> baseline_vs_support(const VectorXd& theta, double zero_tol = 0.0);

/// Unadjusted two-sided rule on debiased statistics: |U_j| >= z_{1 - level/2}.
std::vector<Index> baseline_vs_debiased(const TestStatistics& stats, double level = 0.05);

}  // namespace hierfdr
