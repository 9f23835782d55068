#pragma once

#include "hierfdr/dataset.hpp"

namespace hierfdr {

/// Kaplan-Meier (Stute) jump weights of a time-sorted sample. `w` sums to at
/// most one and vanishes on censored rows; `rescaled` is n * w, the diagonal
/// of the weight matrix used by the weighted least-squares loss.
struct KmWeights {
  VectorXd w;
  VectorXd rescaled;
};

enum class KmProduct { Auto, Direct, LogSpace };

/// Auto switches to summed logarithms above this sample size.
inline constexpr Index kKmLogSpaceThreshold = 1000;

KmWeights km_weights_from_status(const VectorXi& sorted_status, KmProduct mode = KmProduct::Auto);
KmWeights compute_km_weights(const SortedDataset& sorted, KmProduct mode = KmProduct::Auto);

}  // namespace hierfdr
