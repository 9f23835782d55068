#include "hierfdr/pipeline.hpp"

#include "hierfdr/error.hpp"
#include "hierfdr/log.hpp"

#include <chrono>
#include <json.hpp>

#include <cstdio>
#include <set>
#include <sstream>

namespace hierfdr {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

AnalysisOptions AnalysisOptions::from_json(const std::string& text) {
  using nlohmann::json;
  AnalysisOptions o;
  if (text.empty()) return o;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("options are not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::Parse, "options must be a JSON object");
  static const std::set<std::string> known{"alpha",     "lambda",     "cv_folds",       "cv_grid",
                                           "mu",        "c0",         "lasso_tol",      "lasso_max_iter",
                                           "debias_tol", "threads",   "df_correction",  "centering"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) fail(ErrorCode::Parse, "unknown analysis option '" + key + "'");
  }
  try {
    o.alpha = j.value("alpha", o.alpha);
    CrossValidate cv;
    cv.folds = j.value("cv_folds", cv.folds);
    cv.grid_size = j.value("cv_grid", cv.grid_size);
    const std::string lambda = j.value("lambda", std::string("cv"));
    if (lambda == "cv") {
      o.lambda = cv;
    } else if (lambda.rfind("fixed:", 0) == 0) {
      o.lambda = FixedRate{std::stod(lambda.substr(6))};
    } else {
      fail(ErrorCode::Parse, "lambda must be 'cv' or 'fixed:<c>'");
    }
    o.mu_constant = j.value("mu", o.mu_constant);
    o.c0 = j.value("c0", o.c0);
    o.lasso_tol = j.value("lasso_tol", o.lasso_tol);
    o.lasso_max_iter = j.value("lasso_max_iter", o.lasso_max_iter);
    o.debias_tol = j.value("debias_tol", o.debias_tol);
    o.threads = j.value("threads", o.threads);
    o.df_correction = j.value("df_correction", o.df_correction);
    const std::string centering = j.value("centering", std::string("km"));
    if (centering == "km") {
      o.centering = Centering::KmWeighted;
    } else if (centering == "none") {
      o.centering = Centering::None;
    } else {
      fail(ErrorCode::Parse, "centering must be 'km' or 'none'");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("malformed options: ") + e.what());
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::Parse, "malformed fixed-rate lambda constant");
  }
  if (!(o.alpha >= 0.0 && o.alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in [0, 1)");
  if (!(o.mu_constant > 0.0)) fail(ErrorCode::InvalidArgument, "mu constant must be positive");
  if (!(o.c0 > 0.25 && o.c0 < 0.5)) fail(ErrorCode::InvalidArgument, "c0 must lie in (1/4, 1/2)");
  return o;
}

std::string AnalysisOptions::to_json() const {
  nlohmann::ordered_json j;
  j["alpha"] = alpha;
  if (const auto* f = std::get_if<FixedRate>(&lambda)) {
    j["lambda"] = "fixed:" + format_double(f->c);
  } else {
    const auto& cv = std::get<CrossValidate>(lambda);
    j["lambda"] = "cv";
    j["cv_folds"] = cv.folds;
    j["cv_grid"] = cv.grid_size;
  }
  j["mu"] = mu_constant;
  j["c0"] = c0;
  j["lasso_tol"] = lasso_tol;
  j["lasso_max_iter"] = lasso_max_iter;
  j["debias_tol"] = debias_tol;
  j["df_correction"] = df_correction;
  j["threads"] = threads;
  j["centering"] = centering == Centering::KmWeighted ? "km" : "none";
  return j.dump();
}

namespace {

CenteredDesign make_centered(const SortedDataset& sorted, const KmWeights& weights, Centering centering) {
  if (centering == Centering::KmWeighted) return center_columns(sorted.design, sorted.dataset.y(), weights.w);
  const Index p = sorted.design.phi.cols();
  return CenteredDesign{sorted.design, sorted.dataset.y(), VectorXd::Zero(p), 0.0};
}

}  // namespace

Analysis prepare_analysis(const SurvivalDataset& data, const AnalysisOptions& options) {
  SortedDataset sorted = sort_by_time(data);
  if (sorted.design.index_map.p() < 3) fail(ErrorCode::InvalidArgument, "need p >= 3 coefficients");
  KmWeights weights = compute_km_weights(sorted);
  if (!(weights.w.sum() > 0.0)) fail(ErrorCode::InvalidArgument, "all observations are censored");
  CenteredDesign centered = make_centered(sorted, weights, options.centering);

  using Clock = std::chrono::steady_clock;
  auto seconds_since = [](Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); };
  StageTimings timings;
  auto t = Clock::now();
  LambdaSelection lambda = select_lambda(sorted.design,
                                         sorted.dataset.y(), sorted.dataset.status(), options.lambda,
                                         PenaltySpec::lasso(0.0), options.threads);
  timings.lambda_s = seconds_since(t);
  log::info("selected lambda " + format_double(lambda.lambda));

  t = Clock::now();

  const WeightedLsProblem problem = WeightedLsProblem::from_design(centered.design.phi, centered.y, weights.w);
  LassoFit lasso = fit_penalized(problem, PenaltySpec::lasso(lambda.lambda),
                                 SolverControl{options.lasso_tol, options.lasso_max_iter});
  lasso.objective = penalized_objective(centered.design.phi, centered.y, weights.w, lasso.theta_hat, lasso.penalty);
  timings.lasso_s = seconds_since(t);

  DebiasOptions dopt;
  dopt.mu_constant = options.mu_constant;
  dopt.c0 = options.c0;
  dopt.tol = options.debias_tol;
  dopt.threads = options.threads;
  t = Clock::now();
  DebiasedFit debiased = debias_estimate(lasso, centered.design, centered.y, weights, dopt, &problem.gram);
  timings.debias_s = seconds_since(t);

  t = Clock::now();

  InfluenceTable influence = compute_influence(sorted.dataset.y(), sorted.dataset.status(), centered.design.phi,
                                               centered.y, lasso.theta_hat);
  CovarianceEstimate covariance = covariance_from_influence(influence, CovarianceMode::DiagOnly, &debiased.m_hat);
  if (options.df_correction) {
    const double s = static_cast<double>((lasso.theta_hat.array() != 0.0).count());
    const double dof = static_cast<double>(data.n()) - 1.0 - s;
    if (dof > 0.0) covariance.lambda_diag *= (static_cast<double>(data.n()) - 1.0) / dof;
  }
  TestStatistics stats =
      test_statistics(debiased.theta_d, covariance.lambda_diag, data.n(), sorted.design.index_map);
  timings.covariance_s = seconds_since(t);

  return Analysis{std::move(sorted),   std::move(weights),   std::move(centered),   std::move(lambda),
                  std::move(debiased), std::move(influence), std::move(covariance), std::move(stats),
                  timings};
}

AnalysisReport analyze(const SurvivalDataset& data, const AnalysisOptions& options) {
  Analysis analysis = prepare_analysis(data, options);
  RejectionResult rejection = hierarchical_threshold(analysis.stats, options.alpha);
  std::string json = rejection_to_json(rejection, analysis.stats, analysis.debiased.theta_d, data.x_names(),
                                       data.z_names());
  return AnalysisReport{std::move(analysis), std::move(rejection), std::move(json)};
}

namespace {

const char* role_name(EffectKind kind) {
  switch (kind) {
    case EffectKind::Main: return "main";
    case EffectKind::Env: return "env";
    case EffectKind::Interaction: return "interaction";
  }
  return "?";
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string coefficient_table_csv(const AnalysisReport& report) {
  const Analysis& a = report.analysis;
  const IndexMap& map = a.stats.index_map;
  const auto& xn = a.sorted.dataset.x_names();
  const auto& zn = a.sorted.dataset.z_names();
  std::vector<char> rejected(static_cast<std::size_t>(map.p()), 0);
  for (Index l : report.rejection.selected()) rejected[static_cast<std::size_t>(l)] = 1;
  std::ostringstream os;
  os << "index,role,label,theta_hat,theta_d,u,valid,rejected\n";
  for (Index l = 0; l < map.p(); ++l) {
    os << l + 1 << ',' << role_name(map.decode(l).kind) << ',' << quote(map.label(l, xn, zn)) << ','
       << format_double(a.debiased.lasso.theta_hat[l]) << ',' << format_double(a.debiased.theta_d[l]) << ','
       << format_double(a.stats.u[l]) << ',' << int(a.stats.valid[static_cast<std::size_t>(l)]) << ','
       << int(rejected[static_cast<std::size_t>(l)]) << '\n';
  }
  return os.str();
}

std::string inspect_csv(const SurvivalDataset& data, const std::string& what, const AnalysisOptions& options) {
  std::ostringstream os;
  if (what == "weights") {
    const SortedDataset sorted = sort_by_time(data);
    const KmWeights w = compute_km_weights(sorted);
    os << "sorted_index,original_row,y,status,w,nw\n";
    for (Index i = 0; i < data.n(); ++i) {
      os << i + 1 << ',' << sorted.permutation[static_cast<std::size_t>(i)] + 1 << ','
         << format_double(sorted.dataset.y()[i]) << ',' << sorted.dataset.status()[i] << ',' << format_double(w.w[i])
         << ',' << format_double(w.rescaled[i]) << '\n';
    }
    return os.str();
  }
  if (what == "gram-diag") {
    const SortedDataset sorted = sort_by_time(data);
    const KmWeights w = compute_km_weights(sorted);
    const CenteredDesign c = make_centered(sorted, w, options.centering);
    const VectorXd diag = c.design.phi.array().square().matrix().transpose() * w.w;
    const IndexMap& map = sorted.design.index_map;
    os << "index,label,gamma_jj\n";
    for (Index l = 0; l < map.p(); ++l) {
      os << l + 1 << ',' << quote(map.label(l, data.x_names(), data.z_names())) << ',' << format_double(diag[l]) << '\n';
    }
    return os.str();
  }
  if (what == "ustats") {
    const Analysis a = prepare_analysis(data, options);
    const IndexMap& map = a.stats.index_map;
    os << "index,label,u,valid\n";
    for (Index l = 0; l < map.p(); ++l) {
      os << l + 1 << ',' << quote(map.label(l, data.x_names(), data.z_names())) << ',' << format_double(a.stats.u[l])
         << ',' << int(a.stats.valid[static_cast<std::size_t>(l)]) << '\n';
    }
    return os.str();
  }
  fail(ErrorCode::InvalidArgument, "unknown inspect target '" + what + "' (expected weights, ustats or gram-diag)");
}

}  // namespace hierfdr
