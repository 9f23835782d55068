#include "hierfdr/simlab.hpp"

#include "hierfdr/baselines.hpp"
#include "hierfdr/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hierfdr {

std::string to_string(SurvivalModel model) {
  return model == SurvivalModel::Exponential ? "exponential" : "loglogistic";
}

SurvivalModel survival_model_from_string(const std::string& name) {
  if (name == "exponential") return SurvivalModel::Exponential;
  if (name == "loglogistic" || name == "log-logistic") return SurvivalModel::LogLogistic;
  fail(ErrorCode::InvalidArgument, "unknown survival model '" + name + "' (expected exponential or loglogistic)");
}

SimConfig SimConfig::desk() { return SimConfig{}; }

SimConfig SimConfig::paper_scale() {
  SimConfig c;
  c.n = 500;
  c.d = 200;
  c.q = 5;
  c.s_alpha = 10;
  c.eta = 0.3;
  c.a = 1.0;
  c.r = 0.2;
  c.replicates = 200;
  return c;
}

void SimConfig::validate() const {
  if (n < 10) fail(ErrorCode::InvalidArgument, "n must be at least 10");
  if (d < 1 || q < 1) fail(ErrorCode::InvalidArgument, "d and q must be positive");
  if (d + (d + 1) * q < 3) fail(ErrorCode::InvalidArgument, "p must be at least 3");
  if (!(eta >= 0.0 && eta < 1.0)) fail(ErrorCode::InvalidArgument, "eta must lie in [0, 1)");
  if (!(a > 0.0)) fail(ErrorCode::InvalidArgument, "a must be positive");
  if (!(r >= 0.0 && r < 1.0)) fail(ErrorCode::InvalidArgument, "censoring rate r must lie in [0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  if (replicates < 1) fail(ErrorCode::InvalidArgument, "replicates must be at least 1");
  if (!null_model) {
    if (s_alpha < 0 || s_alpha > d) fail(ErrorCode::InvalidArgument, "s_alpha must lie in [0, d]");
    if (q < 5) fail(ErrorCode::InvalidArgument, "the default sparsity pattern needs q >= 5");
  }
}

std::string SimConfig::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["d"] = d;
  j["q"] = q;
  j["p"] = d + (d + 1) * q;
  j["eta"] = eta;
  j["a"] = a;
  j["r"] = r;
  j["s_alpha"] = s_alpha;
  j["model"] = to_string(model);
  j["alpha"] = alpha;
  j["seed"] = seed;
  j["replicates"] = replicates;
  j["null_model"] = null_model;
  return j.dump();
}

const std::vector<std::string>& SimConfig::sweepable_fields() {
  static const std::vector<std::string> fields{"n", "d", "q", "eta", "a", "r", "s_alpha", "alpha"};
  return fields;
}

void SimConfig::set_field(const std::string& name, double value) {
  auto as_index = [&] {
    if (value != std::floor(value)) fail(ErrorCode::InvalidArgument, "field '" + name + "' needs an integer value");
    return static_cast<Index>(value);
  };
  if (name == "n") {
    n = as_index();
  } else if (name == "d") {
    d = as_index();
  } else if (name == "q") {
    q = as_index();
  } else if (name == "eta") {
    eta = value;
  } else if (name == "a") {
    a = value;
  } else if (name == "r") {
    r = value;
  } else if (name == "s_alpha") {
    s_alpha = as_index();
  } else if (name == "alpha") {
    alpha = value;
  } else {
    std::string valid;
    for (const auto& f : sweepable_fields()) valid += (valid.empty() ? "" : ", ") + f;
    fail(ErrorCode::InvalidArgument, "unknown sweep field '" + name + "'; valid fields: " + valid);
  }
}

SimConfig SimConfig::from_json(const std::string& text, const SimConfig& base) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::Parse, "config must be a JSON object");
  SimConfig c = base;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "model") {
        c.model = survival_model_from_string(value.get<std::string>());
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "replicates") {
        c.replicates = value.get<int>();
      } else if (key == "null_model") {
        c.null_model = value.get<bool>();
      } else if (key == "p") {
        continue;  // derived
      } else {
        c.set_field(key, value.get<double>());
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("malformed config: ") + e.what());
  }
  return c;
}

GroundTruth default_truth(const SimConfig& config) {
  const IndexMap map(config.d, config.q);
  GroundTruth t;
  t.index_map = map;
  t.theta0 = VectorXd::Zero(map.p());
  if (!config.null_model) {
    for (Index j = 0; j < config.s_alpha; ++j) {
      t.theta0[map.encode(EffectRole::Main(j))] = 2.0;
      t.theta0[map.encode(EffectRole::Interaction(j, 1))] = 1.0;
      t.theta0[map.encode(EffectRole::Interaction(j, 4))] = 1.0;
    }
    t.theta0[map.encode(EffectRole::Env(1))] = 2.0;
    t.theta0[map.encode(EffectRole::Env(4))] = 2.0;
  }
  for (Index l = 0; l < map.p(); ++l) {
    if (t.theta0[l] != 0.0) t.support.push_back(l);
  }
  return t;
}

Rng make_stream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32),
                    static_cast<std::uint32_t>(purpose), 0x68666472u};
  return Rng(seq);
}

namespace {

void fill_covariates(Index rows, const SimConfig& config, Rng& rng, MatrixXd& x, MatrixXd& z) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double innov = std::sqrt(1.0 - config.eta * config.eta);
  x.resize(rows, config.d);
  z.resize(rows, config.q);
  for (Index i = 0; i < rows; ++i) {
    double prev = normal(rng);
    x(i, 0) = prev;
    for (Index j = 1; j < config.d; ++j) {
      prev = config.eta * prev + innov * normal(rng);
      x(i, j) = prev;
    }
    for (Index k = 0; k < config.q; ++k) z(i, k) = normal(rng);
  }
}

// phi_i^T theta0 without materialising the interaction columns.
VectorXd linear_predictor(const MatrixXd& x, const MatrixXd& z, const GroundTruth& truth) {
  const IndexMap& map = truth.index_map;
  VectorXd eta = VectorXd::Zero(x.rows());
  for (Index l : truth.support) {
    const EffectRole role = map.decode(l);
    const double c = truth.theta0[l];
    switch (role.kind) {
      case EffectKind::Main: eta += c * x.col(role.main); break;
      case EffectKind::Env: eta += c * z.col(role.env); break;
      case EffectKind::Interaction: eta += c * x.col(role.main).cwiseProduct(z.col(role.env)); break;
    }
  }
  return eta;
}

double draw_event_time(SurvivalModel model, double lin, Rng& rng) {
  if (model == SurvivalModel::Exponential) {
    std::exponential_distribution<double> unit(1.0);
    return unit(rng) * std::exp(lin);
  }
  // Hazard 1/(e^lin + t) gives S(t) = e^lin / (e^lin + t); invert S(T) = U.
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double u = uniform(rng);
  while (u <= 0.0) u = uniform(rng);
  return std::exp(lin) * (1.0 - u) / u;
}

double expected_censoring(const std::vector<double>& times, double rate) {
  double acc = 0.0;
  for (double t : times) acc += -std::expm1(-rate * t);
  return acc / static_cast<double>(times.size());
}

}  // namespace

SimulatedCovariates generate_design(const SimConfig& config, Rng& rng) {
  MatrixXd x;
  MatrixXd z;
  fill_covariates(config.n, config, rng, x, z);
  AugmentedDesign design = build_augmented_design(x, z);
  return SimulatedCovariates{std::move(x), std::move(z), std::move(design)};
}

SurvivalDataset generate_survival(const SimulatedCovariates& covariates, const GroundTruth& truth,
                                  const SimConfig& config, double censoring_rate, Rng& rng) {
  const Index n = covariates.x.rows();
  if (truth.index_map.d() != covariates.x.cols() || truth.index_map.q() != covariates.z.cols()) {
    fail(ErrorCode::DimensionMismatch, "ground truth dimensions differ from the covariates");
  }
  const VectorXd lin = config.a * linear_predictor(covariates.x, covariates.z, truth);
  VectorXd event(n);
  for (Index i = 0; i < n; ++i) event[i] = draw_event_time(config.model, lin[i], rng);
  VectorXd y(n);
  VectorXi status(n);
  std::exponential_distribution<double> censor(censoring_rate > 0.0 ? censoring_rate : 1.0);
  for (Index i = 0; i < n; ++i) {
    const double c = censoring_rate > 0.0 ? censor(rng) : std::numeric_limits<double>::infinity();
    status[i] = event[i] <= c ? 1 : 0;
    y[i] = std::log(std::min(event[i], c));
  }
  return SurvivalDataset(std::move(y), std::move(status), covariates.x, covariates.z);
}

double calibrate_censoring(const SimConfig& config, const GroundTruth& truth, Rng& rng) {
  if (!(config.r >= 0.0 && config.r < 1.0)) fail(ErrorCode::InvalidArgument, "censoring rate r must lie in [0, 1)");
  if (config.r == 0.0) return 0.0;
  constexpr Index kPilot = 10000;
  MatrixXd x;
  MatrixXd z;
  fill_covariates(kPilot, config, rng, x, z);
  const VectorXd lin = config.a * linear_predictor(x, z, truth);
  std::vector<double> times(static_cast<std::size_t>(kPilot));
  for (Index i = 0; i < kPilot; ++i) times[static_cast<std::size_t>(i)] = draw_event_time(config.model, lin[i], rng);

  // Censoring fraction is increasing in the rate; bracket, then bisect.
  std::vector<double> sorted = times;
  std::nth_element(sorted.begin(), sorted.begin() + kPilot / 2, sorted.end());
  double hi = 1.0 / std::max(sorted[static_cast<std::size_t>(kPilot / 2)], 1e-300);
  double lo = hi;
  while (expected_censoring(times, hi) < config.r) hi *= 2.0;
  while (lo > 0.0 && expected_censoring(times, lo) > config.r) lo *= 0.5;
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 60; ++it) {
    mid = 0.5 * (lo + hi);
    const double frac = expected_censoring(times, mid);
    if (std::abs(frac - config.r) <= 1e-5) break;
    (frac < config.r ? lo : hi) = mid;
  }
  return mid;
}

MetricsRecord evaluate_selection(const GroundTruth& truth, double signal_scale, const std::vector<Index>& selected,
                                 const VectorXd& theta_est) {
  const IndexMap& map = truth.index_map;
  MetricsRecord m;
  const std::vector<Index> sel = restrict_to_testable(map, selected);
  Index testable_support = 0;
  for (Index l : truth.support) {
    if (is_testable(map, l)) ++testable_support;
  }
  for (Index l : sel) {
    if (truth.theta0[l] != 0.0) {
      ++m.true_discoveries;
    } else if (map.is_main(l)) {
      ++m.false_main;
    } else {
      ++m.false_interaction;
    }
  }
  m.rejections = static_cast<Index>(sel.size());
  m.fdp = static_cast<double>(m.false_main + m.false_interaction) / static_cast<double>(std::max<Index>(m.rejections, 1));
  m.power = testable_support > 0 ? static_cast<double>(m.true_discoveries) / static_cast<double>(testable_support) : 0.0;
  if (theta_est.size() == map.p()) {
    m.mse = (theta_est - signal_scale * truth.theta0).squaredNorm() / static_cast<double>(map.p());
  } else {
    m.mse = std::numeric_limits<double>::quiet_NaN();
  }
  m.t0 = std::numeric_limits<double>::quiet_NaN();
  return m;
}

MetricsRecord evaluate_replicate(const GroundTruth& truth, double signal_scale, const RejectionResult& result,
                                 const VectorXd& theta_d) {
  const IndexMap& map = truth.index_map;
  const std::vector<Index> sel = result.selected();
  VectorXd kept = VectorXd::Zero(theta_d.size());
  if (theta_d.size() == map.p()) {
    for (Index l : sel) kept[l] = theta_d[l];
    for (Index k = 0; k < map.q(); ++k) kept[map.d() + k] = theta_d[map.d() + k];
  }
  MetricsRecord m = evaluate_selection(truth, signal_scale, sel, kept);
  m.t0 = result.t0;
  m.fallback = result.fallback_used;
  return m;
}

}  // namespace hierfdr
