#pragma once

#include "hierfdr/baselines.hpp"
#include "hierfdr/dataset.hpp"
#include "hierfdr/debias.hpp"
#include "hierfdr/hfdr.hpp"
#include "hierfdr/influence_cov.hpp"
#include "hierfdr/km_weights.hpp"
#include "hierfdr/penalized_wls.hpp"

#include <string>

namespace hierfdr {

enum class Centering { KmWeighted, None };

struct AnalysisOptions {
  double alpha = 0.1;
  LambdaMode lambda = CrossValidate{};
  double mu_constant = 2.0;
  double c0 = 0.45;
  double lasso_tol = 1e-7;
  int lasso_max_iter = 100000;
  double debias_tol = 1e-6;
  Centering centering = Centering::KmWeighted;
  /// Scales the residual-based variance by (n-1)/(n-1-s), s = |supp(theta_hat)|.
  bool df_correction = true;
  std::size_t threads = 1;

  /// Parses the options object used by the C interface and the CLI:
  /// {"alpha", "lambda": "cv" | "fixed:<c>", "mu", "c0", "threads", "centering": "km"|"none", "df_correction"}.
  static AnalysisOptions from_json(const std::string& text);
  std::string to_json() const;
};

/// Everything up to and including the test statistics.
struct StageTimings {
  double lambda_s = 0.0;
  double lasso_s = 0.0;
  double debias_s = 0.0;
  double covariance_s = 0.0;
};

struct Analysis {
  SortedDataset sorted;
  KmWeights weights;
  CenteredDesign centered;
  LambdaSelection lambda;
  DebiasedFit debiased;
  InfluenceTable influence;
  CovarianceEstimate covariance;
  TestStatistics stats;
  StageTimings timings;
};

Analysis prepare_analysis(const SurvivalDataset& data, const AnalysisOptions& options);

struct AnalysisReport {
  Analysis analysis;
  RejectionResult rejection;
  std::string rejection_json;
};

AnalysisReport analyze(const SurvivalDataset& data, const AnalysisOptions& options);

/// One row per coefficient: index, role, label, theta_hat, theta_d, u, valid, rejected.
std::string coefficient_table_csv(const AnalysisReport& report);

/// Diagnostics: "weights", "ustats" or "gram-diag".
std::string inspect_csv(const SurvivalDataset& data, const std::string& what, const AnalysisOptions& options);

/// Shared CSV float formatting (17 significant digits).
std::string format_double(double v);

}  // namespace hierfdr
