#include "hierfdr/study.hpp"

#include "hierfdr/error.hpp"
#include "hierfdr/log.hpp"
#include "hierfdr/parallel.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace hierfdr {

namespace {

constexpr std::uint64_t kPurposeData = 1;
constexpr std::uint64_t kPurposeCalibration = 2;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Keeps the estimate on the selected set and on the always-tested environment effects.
VectorXd masked(const VectorXd& theta, const IndexMap& map, const std::vector<Index>& selected) {
  VectorXd out = VectorXd::Zero(theta.size());
  for (Index l : selected) out[l] = theta[l];
  for (Index k = 0; k < map.q(); ++k) out[map.d() + k] = theta[map.d() + k];
  return out;
}

bool hierarchy_holds(const RejectionResult& r) {
  for (const auto& [j, ks] : r.interactions) {
    if (ks.empty()) continue;
    bool found = false;
    for (Index m : r.main_effects) found = found || m == j;
    if (!found) return false;
  }
  return true;
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::Proposed: return "proposed";
    case Method::SurvFcd: return "surv-fcd";
    case Method::Bh: return "bh";
    case Method::BhHierarchy: return "bh-hierarchy";
    case Method::VsDLasso: return "vs-dlasso";
    case Method::VsLasso: return "vs-lasso";
    case Method::VsMcp: return "vs-mcp";
  }
  return "?";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::Proposed, Method::SurvFcd, Method::Bh,    Method::BhHierarchy,
                                           Method::VsDLasso, Method::VsLasso, Method::VsMcp};
  return methods;
}

Method method_from_string(const std::string& name) {
  for (Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  std::string valid;
  for (Method m : all_methods()) valid += (valid.empty() ? "" : ", ") + to_string(m);
  fail(ErrorCode::InvalidArgument, "unknown method '" + name + "'; valid methods: " + valid);
}

ReplicateOutcome run_replicate(const SimConfig& config, const GroundTruth& truth, double censoring_rate,
                               int replicate, const StudyOptions& options) {
  ReplicateOutcome out;
  out.replicate = replicate;
  Rng rng = make_stream(config.seed, static_cast<std::uint64_t>(replicate), kPurposeData);
  const SimulatedCovariates cov = generate_design(config, rng);
  const SurvivalDataset data = generate_survival(cov, truth, config, censoring_rate, rng);
  out.censored_fraction = 1.0 - data.status().cast<double>().mean();
  const IndexMap& map = truth.index_map;
  const double a = config.a;

  bool needs_analysis = false;
  for (Method m : options.methods) {
    needs_analysis = needs_analysis || m == Method::Proposed || m == Method::SurvFcd || m == Method::VsDLasso ||
                     m == Method::VsLasso;
  }
  std::optional<Analysis> analysis;
  if (needs_analysis) analysis = prepare_analysis(data, options.analysis);
  std::optional<MarginalPValues> marginal;
  double marginal_s = 0.0;

  for (Method method : options.methods) {
    MetricsRecord m;
    auto t = Clock::now();
    switch (method) {
      case Method::Proposed: {
        const RejectionResult r = hierarchical_threshold(analysis->stats, config.alpha);
        m = evaluate_replicate(truth, a, r, analysis->debiased.theta_d);
        out.hierarchy_ok = hierarchy_holds(r);
        const StageTimings& st = analysis->timings;
        m.runtime_s = seconds_since(t) + st.lambda_s + st.lasso_s + st.debias_s + st.covariance_s;
        break;
      }
      case Method::SurvFcd: {
        const FlatRejection r = baseline_fcd(analysis->stats, config.alpha);
        m = evaluate_selection(truth, a, r.selected, masked(analysis->debiased.theta_d, map, r.selected));
        m.t0 = r.t;
        m.fallback = r.fallback_used;
        const StageTimings& st = analysis->timings;
        m.runtime_s = seconds_since(t) + st.lambda_s + st.lasso_s + st.debias_s + st.covariance_s;
        break;
      }
      case Method::VsDLasso: {
        const std::vector<Index> sel = baseline_vs_debiased(analysis->stats);
        m = evaluate_selection(truth, a, sel, masked(analysis->debiased.theta_d, map, sel));
        const StageTimings& st = analysis->timings;
        m.runtime_s = seconds_since(t) + st.lambda_s + st.lasso_s + st.debias_s + st.covariance_s;
        break;
      }
      case Method::VsLasso: {
        const VectorXd& theta = analysis->debiased.lasso.theta_hat;
        m = evaluate_selection(truth, a, baseline_vs_support(theta), theta);
        m.runtime_s = seconds_since(t) + analysis->timings.lambda_s + analysis->timings.lasso_s;
        break;
      }
      case Method::VsMcp: {
        const SortedDataset sorted = sort_by_time(data, cov.design);
        const KmWeights w = compute_km_weights(sorted);
        const CenteredDesign centered = options.analysis.centering == Centering::KmWeighted
                                            ? center_columns(sorted.design, sorted.dataset.y(), w.w)
                                            : CenteredDesign{sorted.design, sorted.dataset.y(),
                                                             VectorXd::Zero(sorted.design.phi.cols()), 0.0};
        const PenaltySpec shape = PenaltySpec::mcp(0.0, options.mcp_xi);
        const LambdaSelection sel = select_lambda(sorted.design, sorted.dataset.y(), sorted.dataset.status(),
                                                  options.analysis.lambda, shape, options.analysis.threads);
        const WeightedLsProblem problem = WeightedLsProblem::from_design(centered.design.phi, centered.y, w.w);
        LassoFit fit;
        try {
          fit = fit_penalized(problem, PenaltySpec::mcp(sel.lambda, options.mcp_xi),
                              SolverControl{options.analysis.lasso_tol, options.analysis.lasso_max_iter});
        } catch (const NonConvergenceError& e) {
          fit = e.partial();
        }
        m = evaluate_selection(truth, a, baseline_vs_support(fit.theta_hat), fit.theta_hat);
        m.runtime_s = seconds_since(t);
        break;
      }
      case Method::Bh:
      case Method::BhHierarchy: {
        if (!marginal) {
          marginal = marginal_wls_pvalues(sort_by_time(data, cov.design));
          marginal_s = seconds_since(t);
          t = Clock::now();
        }
        const std::span<const double> pv(marginal->pvalues.data(), static_cast<std::size_t>(marginal->pvalues.size()));
        if (method == Method::Bh) {
          const std::vector<Index> sel = baseline_bh_flat(pv, map, config.alpha);
          m = evaluate_selection(truth, a, sel, masked(marginal->slopes, map, sel));
        } else {
          const RejectionResult r = baseline_bh_hierarchy(pv, map, config.alpha, options.bh_hierarchy);
          const std::vector<Index> sel = r.selected();
          m = evaluate_selection(truth, a, sel, masked(marginal->slopes, map, sel));
        }
        m.runtime_s = seconds_since(t) + marginal_s;
        break;
      }
    }
    if (!options.record_timing) m.runtime_s = 0.0;
    out.metrics.push_back(m);
  }
  return out;
}

StudyReport run_study(const SimConfig& config, const StudyOptions& options) {
  config.validate();
  if (options.methods.empty()) fail(ErrorCode::InvalidArgument, "no methods requested");
  StudyReport report;
  report.config = config;
  report.methods = options.methods;
  const GroundTruth truth = default_truth(config);
  Rng calib = make_stream(config.seed, 0, kPurposeCalibration);
  report.censoring_rate = calibrate_censoring(config, truth, calib);
  log::info("censoring rate " + std::to_string(report.censoring_rate) + " for target " + std::to_string(config.r));

  const auto reps = static_cast<std::size_t>(config.replicates);
  report.outcomes.resize(reps);
  StudyOptions inner = options;
  if (options.threads > 1) inner.analysis.threads = 1;
  parallel_for(reps, options.threads, [&](std::size_t r) {
    ReplicateOutcome& o = report.outcomes[r];
    try {
      o = run_replicate(config, truth, report.censoring_rate, static_cast<int>(r), inner);
    } catch (const std::exception& e) {
      o = ReplicateOutcome{};
      o.replicate = static_cast<int>(r);
      o.failed = true;
      o.error = e.what();
      log::warn("replicate " + std::to_string(r) + " failed: " + o.error);
    }
  });

  double censored = 0.0;
  for (const auto& o : report.outcomes) {
    if (o.failed) {
      ++report.failures;
      continue;
    }
    censored += o.censored_fraction;
    if (!o.hierarchy_ok) ++report.hierarchy_violations;
  }
  if (static_cast<double>(report.failures) > options.failure_abort_fraction * static_cast<double>(reps)) {
    std::string first;
    for (const auto& o : report.outcomes) {
      if (o.failed) {
        first = o.error;
        break;
      }
    }
    fail(ErrorCode::NonConvergence, std::to_string(report.failures) + " of " + std::to_string(reps) +
                                        " replicates failed; first error: " + first);
  }
  const int ok = static_cast<int>(reps) - report.failures;
  report.achieved_censoring = ok > 0 ? censored / ok : std::numeric_limits<double>::quiet_NaN();

  for (std::size_t mi = 0; mi < options.methods.size(); ++mi) {
    MethodSummary s;
    s.method = options.methods[mi];
    s.replicates_ok = ok;
    double fdp_sq = 0.0;
    for (const auto& o : report.outcomes) {
      if (o.failed) continue;
      const MetricsRecord& m = o.metrics[mi];
      s.mean_fdr += m.fdp;
      fdp_sq += m.fdp * m.fdp;
      s.mean_power += m.power;
      s.mean_mse += m.mse;
      s.mean_runtime_s += m.runtime_s;
    }
    if (ok > 0) {
      s.mean_fdr /= ok;
      s.mean_power /= ok;
      s.mean_mse /= ok;
      s.mean_runtime_s /= ok;
    }
    if (ok > 1) {
      const double var = std::max(0.0, (fdp_sq - ok * s.mean_fdr * s.mean_fdr) / (ok - 1));
      s.sd_fdp = std::sqrt(var);
      s.mcse_fdr = s.sd_fdp / std::sqrt(static_cast<double>(ok));
    }
    report.summaries.push_back(s);
  }
  return report;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string replicates_csv(const StudyReport& report) {
  std::ostringstream os;
  os << "replicate,method,fdp,power,mse,runtime_s,t0,fallback,R\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& o : report.outcomes) {
    for (std::size_t mi = 0; mi < report.methods.size(); ++mi) {
      os << o.replicate << ',' << to_string(report.methods[mi]) << ',';
      if (o.failed) {
        os << "nan,nan,nan,nan,nan,nan,nan\n";
        continue;
      }
      const MetricsRecord& m = o.metrics[mi];
      os << num(m.fdp) << ',' << num(m.power) << ',' << num(m.mse) << ',' << num(m.runtime_s) << ','
         << num(std::isfinite(m.t0) ? m.t0 : nan) << ',' << int(m.fallback) << ',' << m.rejections << '\n';
    }
  }
  return os.str();
}

namespace {

nlohmann::ordered_json sweep_header(const SweepSpec& sweep) {
  nlohmann::ordered_json j;
  j["field"] = sweep.field;
  j["values"] = sweep.values;
  return j;
}

double json_safe(double v) { return std::isfinite(v) ? v : 0.0; }

}  // namespace

std::string aggregate_json(const SweepSpec& sweep, const std::vector<StudyReport>& reports) {
  nlohmann::ordered_json root;
  root["sweep"] = sweep_header(sweep);
  root["studies"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const StudyReport& r = reports[i];
    nlohmann::ordered_json s;
    if (!sweep.field.empty() && i < sweep.values.size()) s["value"] = sweep.values[i];
    s["config"] = nlohmann::ordered_json::parse(r.config.to_json());
    s["censoring_rate"] = r.censoring_rate;
    s["achieved_censoring"] = json_safe(r.achieved_censoring);
    s["failures"] = r.failures;
    s["hierarchy_violations"] = r.hierarchy_violations;
    s["methods"] = nlohmann::ordered_json::array();
    for (const auto& m : r.summaries) {
      nlohmann::ordered_json mj;
      mj["method"] = to_string(m.method);
      mj["mean_fdr"] = m.mean_fdr;
      mj["mcse_fdr"] = m.mcse_fdr;
      mj["sd_fdp"] = m.sd_fdp;
      mj["mean_power"] = m.mean_power;
      mj["mean_mse"] = json_safe(m.mean_mse);
      mj["replicates_ok"] = m.replicates_ok;
      s["methods"].push_back(mj);
    }
    root["studies"].push_back(s);
  }
  return root.dump(2) + "\n";
}

std::string timing_json(const SweepSpec& sweep, const std::vector<StudyReport>& reports) {
  nlohmann::ordered_json root;
  root["sweep"] = sweep_header(sweep);
  root["studies"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    nlohmann::ordered_json s;
    if (!sweep.field.empty() && i < sweep.values.size()) s["value"] = sweep.values[i];
    for (const auto& m : reports[i].summaries) s["mean_runtime_s"][to_string(m.method)] = m.mean_runtime_s;
    root["studies"].push_back(s);
  }
  return root.dump(2) + "\n";
}

std::vector<StudyReport> run_sweep(const SimConfig& base, const SweepSpec& sweep, const StudyOptions& options) {
  std::vector<StudyReport> reports;
  if (sweep.field.empty()) {
    reports.push_back(run_study(base, options));
    return reports;
  }
  if (sweep.values.empty()) fail(ErrorCode::InvalidArgument, "sweep over '" + sweep.field + "' has no values");
  for (double v : sweep.values) {
    SimConfig c = base;
    c.set_field(sweep.field, v);
    log::info("sweep " + sweep.field + " = " + num(v));
    reports.push_back(run_study(c, options));
  }
  return reports;
}

}  // namespace hierfdr
