#include "hierfdr/hfdr.hpp"

#include "hierfdr/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace hierfdr {

double TestStatistics::magnitude(Index j) const {
  return valid[static_cast<std::size_t>(j)] ? std::abs(u[j]) : -std::numeric_limits<double>::infinity();
}

TestStatistics test_statistics(const VectorXd& theta_d, const VectorXd& lambda_diag, Index n, const IndexMap& index_map) {
  const Index p = theta_d.size();
  if (lambda_diag.size() != p || index_map.p() != p) fail(ErrorCode::DimensionMismatch, "statistic inputs differ in p");
  TestStatistics out;
  out.n = n;
  out.index_map = index_map;
  out.u.resize(p);
  out.valid.assign(static_cast<std::size_t>(p), 0);
  const double root_n = std::sqrt(static_cast<double>(n));
  for (Index j = 0; j < p; ++j) {
    if (lambda_diag[j] > 0.0) {
      const double u = root_n * theta_d[j] / std::sqrt(lambda_diag[j]);
      if (std::isfinite(u)) {
        out.u[j] = u;
        out.valid[static_cast<std::size_t>(j)] = 1;
        continue;
      }
    }
    out.u[j] = 0.0;
  }
  return out;
}

double gaussian_tail(double t) {
  if (!(t >= 0.0)) fail(ErrorCode::InvalidArgument, "gaussian_tail needs t >= 0");
  return std::erfc(t / std::sqrt(2.0));
}

double search_upper_bound(Index p) {
  if (p < 3) fail(ErrorCode::InvalidArgument, "threshold search needs p >= 3");
  const double lp = std::log(static_cast<double>(p));
  return std::sqrt(2.0 * lp - 2.0 * std::log(lp));
}

Index RejectionResult::total() const {
  Index r = static_cast<Index>(main_effects.size());
  for (const auto& [j, ks] : interactions) r += static_cast<Index>(ks.size());
  return r;
}

std::vector<Index> RejectionResult::selected() const {
  std::vector<Index> out(main_effects.begin(), main_effects.end());
  for (const auto& [j, ks] : interactions) out.insert(out.end(), ks.begin(), ks.end());
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// Each hierarchical hypothesis is rejected at t exactly when its score is >= t:
// |U_j| for a main effect, min(|U_j|, |U_k|) for an interaction k of main j.
std::vector<double> hierarchical_scores(const TestStatistics& stats) {
  const IndexMap& map = stats.index_map;
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(map.d() * (map.q() + 1)));
  for (Index j = 0; j < map.d(); ++j) {
    const double mj = stats.magnitude(j);
    scores.push_back(mj);
    const Index base = map.interaction_begin(j);
    for (Index k = 0; k < map.q(); ++k) scores.push_back(std::min(mj, stats.magnitude(base + k)));
  }
  std::sort(scores.begin(), scores.end());
  return scores;
}

Index count_at_least(const std::vector<double>& sorted, double t) {
  return static_cast<Index>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
}

}  // namespace

Index hierarchical_rejections(const TestStatistics& stats, double t) {
  return count_at_least(hierarchical_scores(stats), t);
}

RejectionResult reject_at(const TestStatistics& stats, double t) {
  const IndexMap& map = stats.index_map;
  RejectionResult out;
  out.t0 = t;
  for (Index j = 0; j < map.d(); ++j) {
    if (!(stats.magnitude(j) >= t)) continue;
    out.main_effects.push_back(j);
    const Index base = map.interaction_begin(j);
    std::vector<Index> ks;
    for (Index k = 0; k < map.q(); ++k) {
      if (stats.magnitude(base + k) >= t) ks.push_back(base + k);
    }
    if (!ks.empty()) out.interactions.emplace(j, std::move(ks));
  }
  return out;
}

RejectionResult hierarchical_threshold(const TestStatistics& stats, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in [0, 1)");
  const IndexMap& map = stats.index_map;
  const Index p = map.p();
  if (stats.p() != p) fail(ErrorCode::DimensionMismatch, "statistics length differs from index map");
  const double t_p = search_upper_bound(p);
  const double d = static_cast<double>(map.d());
  const double q = static_cast<double>(map.q());

  // The rejection count only changes at observed |U| values; the condition
  // can only switch on at the right end of a constancy interval, so these
  // candidates (plus the search bound itself) reach the infimum's rejection set.
  std::vector<double> candidates{0.0, t_p};
  for (Index j = 0; j < p; ++j) {
    const double m = stats.magnitude(j);
    if (m >= 0.0 && m <= t_p) candidates.push_back(m);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  const std::vector<double> scores = hierarchical_scores(stats);
  for (double t : candidates) {
    const double g = gaussian_tail(t);
    const double r = static_cast<double>(std::max<Index>(count_at_least(scores, t), 1));
    if (d * g * (1.0 + q * g) / r <= alpha) return reject_at(stats, t);
  }
  RejectionResult out = reject_at(stats, std::sqrt(2.0 * std::log(static_cast<double>(p))));
  out.fallback_used = true;
  return out;
}

std::string rejection_to_json(const RejectionResult& result, const TestStatistics& stats, const VectorXd& theta_d,
                              const std::vector<std::string>& x_names, const std::vector<std::string>& z_names) {
  using nlohmann::ordered_json;
  const IndexMap& map = stats.index_map;
  ordered_json j;
  j["t0"] = result.t0;
  j["fallback_used"] = result.fallback_used;
  ordered_json mains = ordered_json::array();
  for (Index m : result.main_effects) mains.push_back(m + 1);
  j["main_effects"] = mains;
  ordered_json inter = ordered_json::array();
  for (const auto& [parent, ks] : result.interactions) {
    for (Index l : ks) {
      const EffectRole role = map.decode(l);
      inter.push_back({{"j", role.main + 1}, {"k", role.env + 1}, {"label", map.label(l, x_names, z_names)}});
    }
  }
  j["interactions"] = inter;
  ordered_json env = ordered_json::array();
  for (Index k = 0; k < map.q(); ++k) {
    const Index l = map.d() + k;
    ordered_json e;
    e["k"] = k + 1;
    e["label"] = map.label(l, x_names, z_names);
    e["theta_d"] = theta_d.size() == map.p() ? theta_d[l] : 0.0;
    e["u"] = stats.u[l];
    e["valid"] = static_cast<bool>(stats.valid[static_cast<std::size_t>(l)]);
    env.push_back(e);
  }
  j["env_estimates"] = env;
  j["main_effect_labels"] = [&] {
    ordered_json names = ordered_json::array();
    for (Index m : result.main_effects) names.push_back(map.label(m, x_names, z_names));
    return names;
  }();
  j["total_rejections"] = result.total();
  return j.dump(2);
}

}  // namespace hierfdr
