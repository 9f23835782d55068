#include "hierfdr/hierfdr.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Error carrying the process exit code.
struct CliError {
  int exit_code;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& message) { throw CliError{kExitUsage, message}; }

void check(hfdr_status status) {
  if (status == HFDR_OK) return;
  const int code = (status == HFDR_E_PARSE || status == HFDR_E_INVALID_ARGUMENT) ? kExitUsage : kExitFailure;
  throw CliError{code, hfdr_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  hfdr_string_free(s);
  return out;
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) usage_error(std::string("cannot read ") + what + " '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Collects outputs in memory, then publishes them with temp-then-rename so a
// failed run leaves no partial files behind.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

  void commit() {
    fs::create_directories(dir_);
    std::vector<fs::path> temps;
    std::vector<fs::path> published;
    try {
      for (const auto& [name, content] : files_) {
        const fs::path tmp = dir_ / ("." + name + ".tmp");
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        temps.push_back(tmp);
        out << content;
        out.close();
        if (!out) throw CliError{kExitFailure, "failed to write " + tmp.string()};
      }
      for (std::size_t i = 0; i < files_.size(); ++i) {
        const fs::path target = dir_ / files_[i].first;
        fs::rename(temps[i], target);
        published.push_back(target);
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& t : temps) fs::remove(t, ec);
      for (const auto& p : published) fs::remove(p, ec);
      throw;
    }
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

struct CommonFlags {
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::string> lambda;
  std::optional<double> mu;
  std::optional<double> c0;
  std::string out;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--alpha", f.alpha, "Target FDR level");
  app->add_option("--seed", f.seed, "Root random seed (drawn from entropy when omitted)");
  app->add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
  app->add_option("--lambda", f.lambda, "Lasso tuning: cv or fixed:<c> (analyze: cv, simulate: fixed:2)");
  app->add_option("--mu", f.mu, "Decorrelator constant c in mu = c*sqrt(log p / n)");
  app->add_option("--c0", f.c0, "Design-bound exponent in (1/4, 1/2)");
  app->add_option("--out", f.out, "Output directory")->required();
}

ordered_json analysis_options(const CommonFlags& f, std::size_t threads) {
  ordered_json j;
  if (f.alpha) j["alpha"] = *f.alpha;
  if (f.lambda) {
    if (*f.lambda != "cv" && f.lambda->rfind("fixed:", 0) != 0) usage_error("--lambda must be cv or fixed:<c>");
    j["lambda"] = *f.lambda;
  }
  if (f.mu) j["mu"] = *f.mu;
  if (f.c0) j["c0"] = *f.c0;
  j["threads"] = threads;
  return j;
}

struct SchemaFlags {
  std::string data;
  std::string schema_file;
  std::string time;
  std::string status;
  std::vector<std::string> z;
  std::vector<std::string> x;
  std::string time_scale = "raw";
  char delimiter = ',';
};

void add_schema(CLI::App* app, SchemaFlags& s) {
  app->add_option("--data", s.data, "Input CSV with a header row")->required();
  app->add_option("--schema", s.schema_file, "JSON sidecar declaring column roles");
  app->add_option("--time", s.time, "Survival time column");
  app->add_option("--status", s.status, "Event indicator column (1 = event)");
  app->add_option("--z", s.z, "Environment columns")->delimiter(',');
  app->add_option("--x", s.x, "Gene columns, or * for all remaining columns")->delimiter(',');
  app->add_option("--time-scale", s.time_scale, "raw or log")->check(CLI::IsMember({"raw", "log"}));
  app->add_option("--delimiter", s.delimiter, "Field delimiter");
}

std::string schema_json(const SchemaFlags& s) {
  if (!s.schema_file.empty()) {
    const std::string text = read_file(s.schema_file, "schema");
    if (!nlohmann::json::accept(text)) usage_error("schema is not valid JSON");
    return text;
  }
  if (s.time.empty() || s.status.empty()) usage_error("either --schema or both --time and --status are required");
  ordered_json j;
  j["time"] = s.time;
  j["status"] = s.status;
  j["z"] = s.z;
  if (s.x.size() == 1 && s.x.front() == "*") {
    j["x"] = "*";
  } else {
    j["x"] = s.x;
  }
  j["time_scale"] = s.time_scale;
  j["delimiter"] = std::string(1, s.delimiter);
  return j.dump();
}

std::uint64_t resolve_seed(const CommonFlags& f, bool& from_entropy) {
  from_entropy = !f.seed.has_value();
  if (f.seed) return *f.seed;
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string manifest(const std::string& command, const ordered_json& config, std::uint64_t seed, bool from_entropy,
                     const std::string& started, const std::vector<std::string>& inputs) {
  ordered_json j;
  j["command"] = command;
  j["version"] = hfdr_version();
  j["seed"] = seed;
  j["seed_from_entropy"] = from_entropy;
  j["started_at"] = started;
  char* ts = nullptr;
  check(hfdr_utc_timestamp(&ts));
  j["finished_at"] = take(ts);
  j["config"] = config;
  j["inputs"] = ordered_json::array();
  for (const auto& path : inputs) {
    char* digest = nullptr;
    check(hfdr_sha256_file(path.c_str(), &digest));
    j["inputs"].push_back({{"path", path}, {"sha256", take(digest)}});
  }
  return j.dump(2) + "\n";
}

std::string now() {
  char* ts = nullptr;
  check(hfdr_utc_timestamp(&ts));
  return take(ts);
}

struct DatasetHandle {
  hfdr_dataset* ptr = nullptr;
  ~DatasetHandle() { hfdr_dataset_free(ptr); }
};

void load_dataset(const SchemaFlags& s, DatasetHandle& ds) {
  const std::string schema = schema_json(s);
  const hfdr_status st = hfdr_dataset_load_csv(s.data.c_str(), schema.c_str(), &ds.ptr);
  if (st == HFDR_E_IO) throw CliError{kExitFailure, hfdr_last_error()};
  check(st);
}

void run_analyze(const CommonFlags& f, const SchemaFlags& s) {
  const std::string started = now();
  bool entropy = false;
  const std::uint64_t seed = resolve_seed(f, entropy);
  DatasetHandle ds;
  load_dataset(s, ds);
  const ordered_json options = analysis_options(f, f.threads);
  hfdr_analysis* raw = nullptr;
  check(hfdr_analyze(ds.ptr, options.dump().c_str(), &raw));
  std::unique_ptr<hfdr_analysis, decltype(&hfdr_analysis_free)> analysis(raw, &hfdr_analysis_free);
  char* rejection = nullptr;
  check(hfdr_analysis_rejection_json(analysis.get(), &rejection));
  char* table = nullptr;
  check(hfdr_analysis_coefficients_csv(analysis.get(), &table));

  ordered_json config;
  config["options"] = options;
  config["schema"] = ordered_json::parse(schema_json(s));
  OutputSet outputs(f.out);
  outputs.add("rejections.json", take(rejection) + "\n");
  outputs.add("coefficients.csv", take(table));
  outputs.add("manifest.json", manifest("analyze", config, seed, entropy, started, {s.data}));
  outputs.commit();
}

void run_inspect(const CommonFlags& f, const SchemaFlags& s, const std::string& what) {
  const std::string started = now();
  bool entropy = false;
  const std::uint64_t seed = resolve_seed(f, entropy);
  DatasetHandle ds;
  load_dataset(s, ds);
  const ordered_json options = analysis_options(f, f.threads);
  char* text = nullptr;
  check(hfdr_inspect(ds.ptr, what.c_str(), options.dump().c_str(), &text));
  ordered_json config;
  config["what"] = what;
  config["options"] = options;
  OutputSet outputs(f.out);
  outputs.add(what + ".csv", take(text));
  outputs.add("manifest.json", manifest("inspect", config, seed, entropy, started, {s.data}));
  outputs.commit();
}

struct SimFlags {
  std::string config_file;
  bool paper_scale = false;
  std::optional<std::string> model;
  std::optional<double> n, d, q, eta, a, r, s_alpha;
  std::optional<int> replicates;
  bool null_model = false;
  std::vector<std::string> methods;
  std::string sweep;
  bool no_timing = false;
  std::string bh_hierarchy = "pooled";
};

std::pair<std::string, std::vector<double>> parse_sweep(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size()) usage_error("--sweep expects field=v1,v2,...");
  std::vector<double> values;
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      usage_error("sweep value '" + item + "' is not a number");
    }
  }
  return {spec.substr(0, eq), values};
}

void run_simulate(const CommonFlags& f, const SimFlags& s) {
  const std::string started = now();
  bool entropy = false;
  const std::uint64_t seed = resolve_seed(f, entropy);

  ordered_json overrides = ordered_json::object();
  std::vector<std::string> inputs;
  if (!s.config_file.empty()) {
    const std::string text = read_file(s.config_file, "config file");
    try {
      overrides = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      usage_error(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!overrides.is_object()) usage_error("config file must hold a JSON object");
    inputs.push_back(s.config_file);
  }
  // Study-level keys may live in the config file next to the simulation fields.
  ordered_json study;
  for (const char* key : {"methods", "threads", "record_timing", "bh_hierarchy", "mcp_xi", "analysis", "sweep"}) {
    if (overrides.contains(key)) {
      study[key] = overrides[key];
      overrides.erase(key);
    }
  }
  auto set = [&](const char* key, const auto& v) {
    if (v) overrides[key] = *v;
  };
  set("n", s.n);
  set("d", s.d);
  set("q", s.q);
  set("eta", s.eta);
  set("a", s.a);
  set("r", s.r);
  set("s_alpha", s.s_alpha);
  set("model", s.model);
  set("replicates", s.replicates);
  set("alpha", f.alpha);
  if (s.null_model) overrides["null_model"] = true;
  overrides["seed"] = seed;

  char* resolved = nullptr;
  check(hfdr_sim_config_resolve(overrides.dump().c_str(), s.paper_scale ? 1 : 0, &resolved));
  const std::string config_text = take(resolved);
  const ordered_json config = ordered_json::parse(config_text);
  if (s.paper_scale) {
    std::cerr << "warning: the large profile runs " << config["replicates"].get<int>()
              << " replicates at p = " << config["p"].get<long>() << " and can take many hours\n";
  }

  ordered_json analysis = study.contains("analysis") ? study["analysis"] : ordered_json::object();
  const ordered_json flag_options = analysis_options(f, 1);
  for (const auto& [k, v] : flag_options.items()) {
    if (k == "alpha") continue;
    analysis[k] = v;
  }
  study["analysis"] = analysis;
  if (!s.methods.empty()) study["methods"] = s.methods;
  study["threads"] = f.threads;
  if (s.no_timing) study["record_timing"] = false;
  if (!study.contains("bh_hierarchy")) study["bh_hierarchy"] = s.bh_hierarchy;

  std::string field;
  std::vector<double> values;
  if (!s.sweep.empty()) {
    std::tie(field, values) = parse_sweep(s.sweep);
  } else if (study.contains("sweep")) {
    const auto& sw = study["sweep"];
    field = sw.at("field").get<std::string>();
    values = sw.at("values").get<std::vector<double>>();
  }
  study.erase("sweep");

  // The thread count does not change any result, so it stays out of the snapshot.
  ordered_json study_for_run = study;
  ordered_json snapshot_study = study;
  snapshot_study.erase("threads");

  hfdr_study* raw = nullptr;
  check(hfdr_simulate(config_text.c_str(), study_for_run.dump().c_str(), field.empty() ? nullptr : field.c_str(),
                      values.data(), values.size(), &raw));
  std::unique_ptr<hfdr_study, decltype(&hfdr_study_free)> result(raw, &hfdr_study_free);

  OutputSet outputs(f.out);
  char* text = nullptr;
  check(hfdr_study_aggregate_json(result.get(), &text));
  outputs.add("aggregate.json", take(text));
  if (!s.no_timing) {
    check(hfdr_study_timing_json(result.get(), &text));
    outputs.add("timing.json", take(text));
  }
  const std::size_t count = hfdr_study_count(result.get());
  for (std::size_t i = 0; i < count; ++i) {
    check(hfdr_study_replicates_csv(result.get(), i, &text));
    std::string name = "replicates.csv";
    if (!field.empty()) {
      std::ostringstream os;
      os << "replicates_" << field << "_" << values[i] << ".csv";
      name = os.str();
    }
    outputs.add(name, take(text));
  }
  ordered_json snapshot;
  snapshot["simulation"] = config;
  snapshot["study"] = snapshot_study;
  if (!field.empty()) snapshot["sweep"] = {{"field", field}, {"values", values}};
  outputs.add("manifest.json", manifest("simulate", snapshot, seed, entropy, started, inputs));
  outputs.commit();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical FDR-controlled inference for high-dimensional AFT models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hfdr_version()));

  CommonFlags analyze_flags;
  SchemaFlags analyze_schema;
  auto* analyze = app.add_subcommand("analyze", "Analyze a survival data set and report rejections");
  add_common(analyze, analyze_flags);
  add_schema(analyze, analyze_schema);

  CommonFlags sim_flags;
  SimFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte-Carlo study");
  add_common(simulate, sim_flags);
  simulate->add_option("--config", sim.config_file, "JSON config file");
  simulate->add_flag("--paper-scale", sim.paper_scale, "Use n=500, d=200, s_alpha=10 as the base config");
  simulate->add_option("--model", sim.model, "exponential or loglogistic")
      ->check(CLI::IsMember({"exponential", "loglogistic"}));
  simulate->add_option("--n", sim.n, "Sample size");
  simulate->add_option("--d", sim.d, "Number of genes");
  simulate->add_option("--q", sim.q, "Number of environment factors");
  simulate->add_option("--eta", sim.eta, "AR(1) correlation");
  simulate->add_option("--a", sim.a, "Signal magnitude");
  simulate->add_option("--r", sim.r, "Target censoring rate");
  simulate->add_option("--s-alpha", sim.s_alpha, "Number of active genes");
  simulate->add_option("--replicates", sim.replicates, "Number of replicates");
  simulate->add_flag("--null", sim.null_model, "Global null (theta0 = 0)");
  simulate->add_option("--methods", sim.methods, "Comma-separated methods")->delimiter(',');
  simulate->add_option("--sweep", sim.sweep, "Vary one field: field=v1,v2,...");
  simulate->add_flag("--no-timing", sim.no_timing, "Do not record runtimes");
  simulate->add_option("--bh-hierarchy", sim.bh_hierarchy, "pooled or per-family")
      ->check(CLI::IsMember({"pooled", "per-family"}));

  CommonFlags inspect_flags;
  SchemaFlags inspect_schema;
  std::string what;
  auto* inspect = app.add_subcommand("inspect", "Dump an intermediate quantity as CSV");
  add_common(inspect, inspect_flags);
  add_schema(inspect, inspect_schema);
  inspect->add_option("--what", what, "weights, ustats or gram-diag")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*analyze) run_analyze(analyze_flags, analyze_schema);
    if (*simulate) run_simulate(sim_flags, sim);
    if (*inspect) run_inspect(inspect_flags, inspect_schema, what);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
