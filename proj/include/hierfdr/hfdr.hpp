#pragma once

#include "hierfdr/dataset.hpp"

#include <map>
#include <string>
#include <vector>

namespace hierfdr {

struct TestStatistics {
  VectorXd u;               // sqrt(n) theta_d / sqrt(Lambda_jj)
  std::vector<char> valid;  // 0 where Lambda_jj <= 0 or the value is not finite
  Index n = 0;
  IndexMap index_map{1, 1};

  Index p() const { return u.size(); }
  /// |u_j| for valid entries, -inf otherwise.
  double magnitude(Index j) const;
};

TestStatistics test_statistics(const VectorXd& theta_d, const VectorXd& lambda_diag, Index n,
                               const IndexMap& index_map);

/// G(t) = 2 (1 - Phi(t)), computed as erfc(t / sqrt 2).
double gaussian_tail(double t);

/// Upper end of the threshold search, sqrt(2 log p - 2 log log p). Needs p >= 3.
double search_upper_bound(Index p);

/// Hierarchical rejections. Main effects are 0-based positions in [0, d);
/// interactions are grouped under their parent main effect.
struct RejectionResult {
  double t0 = 0.0;
  bool fallback_used = false;
  std::vector<Index> main_effects;
  std::map<Index, std::vector<Index>> interactions;  // parent j -> positions in its block

  Index total() const;
  /// All rejected positions, ascending.
  std::vector<Index> selected() const;
};

/// Number of hierarchical rejections at threshold t.
Index hierarchical_rejections(const TestStatistics& stats, double t);

RejectionResult hierarchical_threshold(const TestStatistics& stats, double alpha);

/// Rejection set at a fixed threshold, with the hierarchy applied.
RejectionResult reject_at(const TestStatistics& stats, double t);

/// JSON report: {t0, fallback_used, main_effects, interactions:[{j,k}], env_estimates}
/// with 1-based j/k.
std::string rejection_to_json(const RejectionResult& result, const TestStatistics& stats, const VectorXd& theta_d,
                              const std::vector<std::string>& x_names = {},
                              const std::vector<std::string>& z_names = {});

}  // namespace hierfdr
