#include "hierfdr/km_weights.hpp"

#include "hierfdr/error.hpp"

#include <cmath>

namespace hierfdr {

KmWeights km_weights_from_status(const VectorXi& sorted_status, KmProduct mode) {
  const Index n = sorted_status.size();
  if (n < 1) fail(ErrorCode::InvalidArgument, "empty sample");
  const bool log_space = mode == KmProduct::LogSpace || (mode == KmProduct::Auto && n > kKmLogSpaceThreshold);
  const double nd = static_cast<double>(n);
  VectorXd w(n);
  // Running product over earlier rows of ((n - j) / (n - j + 1))^{delta_j}, 1-based j.
  double prod = 1.0;
  double log_prod = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double at_risk = nd - static_cast<double>(i);  // n - i + 1 in 1-based terms
    if (sorted_status[i] == 1) {
      w[i] = log_space ? std::exp(log_prod - std::log(at_risk)) : prod / at_risk;
      if (at_risk > 1.0) {
        if (log_space) {
          log_prod += std::log(at_risk - 1.0) - std::log(at_risk);
        } else {
          prod *= (at_risk - 1.0) / at_risk;
        }
      }
    } else {
      w[i] = 0.0;
    }
  }
  KmWeights out;
  out.rescaled = w * nd;
  out.w = std::move(w);
  return out;
}

KmWeights compute_km_weights(const SortedDataset& sorted, KmProduct mode) {
  return km_weights_from_status(sorted.dataset.status(), mode);
}

}  // namespace hierfdr
