#pragma once

#include "hierfdr/dataset.hpp"
#include "hierfdr/hfdr.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace hierfdr {

enum class SurvivalModel { Exponential, LogLogistic };

std::string to_string(SurvivalModel model);
SurvivalModel survival_model_from_string(const std::string& name);

struct SimConfig {
  Index n = 400;
  Index d = 100;
  Index q = 5;
  double eta = 0.3;  // AR(1) correlation of X
  double a = 1.0;    // signal magnitude
  double r = 0.2;    // target censoring rate
  Index s_alpha = 5;
  SurvivalModel model = SurvivalModel::Exponential;
  double alpha = 0.1;
  std::uint64_t seed = 1;
  int replicates = 200;
  bool null_model = false;  // theta0 = 0

  /// n=400, d=100, q=5, s_alpha=5.
  static SimConfig desk();
  /// n=500, d=200, q=5, s_alpha=10.
  static SimConfig paper_scale();

  void validate() const;
  std::string to_json() const;
  static SimConfig from_json(const std::string& text, const SimConfig& base = SimConfig::desk());

  /// Sets a numeric field by name; throws listing valid names otherwise.
  void set_field(const std::string& name, double value);
  static const std::vector<std::string>& sweepable_fields();
};

struct GroundTruth {
  VectorXd theta0;             // 2 on main effects, 1 on interactions
  std::vector<Index> support;  // ascending, 0-based
  IndexMap index_map{1, 1};
};

/// S = [s_alpha] u {E2, E5} u {(G_k:E2, G_k:E5) : k in [s_alpha]}; empty under the null.
GroundTruth default_truth(const SimConfig& config);

using Rng = std::mt19937_64;

/// Independent stream for (seed, replicate, purpose), derived through seed_seq.
Rng make_stream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t purpose);

struct SimulatedCovariates {
  MatrixXd x;
  MatrixXd z;
  AugmentedDesign design;
};

/// X rows from a stationary AR(1) Gaussian with correlation eta, Z standard normal.
SimulatedCovariates generate_design(const SimConfig& config, Rng& rng);

/// Event times from the configured model with linear predictor a * phi^T theta0,
/// independent exponential censoring at the given rate (0 disables censoring).
SurvivalDataset generate_survival(const SimulatedCovariates& covariates, const GroundTruth& truth,
                                  const SimConfig& config, double censoring_rate, Rng& rng);

/// Exponential censoring rate hitting the target censoring fraction on a
/// 10^4-draw pilot sample (bisection, at most 60 steps).
double calibrate_censoring(const SimConfig& config, const GroundTruth& truth, Rng& rng);

struct MetricsRecord {
  double fdp = 0.0;
  double power = 0.0;
  double mse = 0.0;
  double runtime_s = 0.0;
  double t0 = 0.0;
  bool fallback = false;
  Index rejections = 0;
  Index false_main = 0;
  Index false_interaction = 0;
  Index true_discoveries = 0;
};

/// FDP and power over the testable hypotheses (main effects of X and the
/// interactions); MSE of the log-time coefficients a * theta0 over all p.
MetricsRecord evaluate_selection(const GroundTruth& truth, double signal_scale, const std::vector<Index>& selected,
                                 const VectorXd& theta_est);

MetricsRecord evaluate_replicate(const GroundTruth& truth, double signal_scale, const RejectionResult& result,
                                 const VectorXd& theta_d);

}  // namespace hierfdr
