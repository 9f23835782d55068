#include "hierfdr/hierfdr.h"

#include "hierfdr/csv.hpp"
#include "hierfdr/error.hpp"
#include "hierfdr/manifest.hpp"
#include "hierfdr/pipeline.hpp"
#include "hierfdr/study.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>

struct hfdr_dataset {
  hierfdr::SurvivalDataset data;
};

struct hfdr_analysis {
  hierfdr::AnalysisReport report;
};

struct hfdr_study {
  hierfdr::SweepSpec sweep;
  std::vector<hierfdr::StudyReport> reports;
};

namespace {

thread_local std::string last_error;

template <class F>
hfdr_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return HFDR_OK;
  } catch (const hierfdr::Error& e) {
    last_error = e.what();
    return static_cast<hfdr_status>(e.code());
  } catch (const nlohmann::json::exception& e) {
    last_error = e.what();
    return HFDR_E_PARSE;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return HFDR_E_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return HFDR_E_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return HFDR_E_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) hierfdr::fail(hierfdr::ErrorCode::InvalidArgument, std::string(what) + " is null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

hierfdr::AnalysisOptions parse_options(const char* json) {
  if (json == nullptr || *json == '\0') return hierfdr::AnalysisOptions{};
  return hierfdr::AnalysisOptions::from_json(json);
}

hierfdr::StudyOptions parse_study(const char* text) {
  using hierfdr::ErrorCode;
  hierfdr::StudyOptions opt;
  opt.methods = hierfdr::all_methods();
  if (text == nullptr || *text == '\0') return opt;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    hierfdr::fail(ErrorCode::Parse, std::string("study options are not valid JSON: ") + e.what());
  }
  if (!j.is_object()) hierfdr::fail(ErrorCode::Parse, "study options must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "methods") {
      opt.methods.clear();
      for (const auto& m : value) opt.methods.push_back(hierfdr::method_from_string(m.get<std::string>()));
    } else if (key == "threads") {
      opt.threads = value.get<std::size_t>();
    } else if (key == "record_timing") {
      opt.record_timing = value.get<bool>();
    } else if (key == "bh_hierarchy") {
      const auto mode = value.get<std::string>();
      if (mode == "pooled") {
        opt.bh_hierarchy = hierfdr::BhHierarchyMode::Pooled;
      } else if (mode == "per-family") {
        opt.bh_hierarchy = hierfdr::BhHierarchyMode::PerFamily;
      } else {
        hierfdr::fail(ErrorCode::InvalidArgument, "bh_hierarchy must be pooled or per-family");
      }
    } else if (key == "mcp_xi") {
      opt.mcp_xi = value.get<double>();
    } else if (key == "analysis") {
      opt.analysis = hierfdr::AnalysisOptions::from_json(value.dump());
      if (!value.contains("lambda")) opt.analysis.lambda = hierfdr::FixedRate{hierfdr::kStudyLambdaRate};
    } else {
      hierfdr::fail(ErrorCode::InvalidArgument, "unknown study option '" + key + "'");
    }
  }
  if (opt.threads == 0) opt.threads = 1;
  return opt;
}

}  // namespace

extern "C" {

const char* hfdr_version(void) {
  static const std::string v = hierfdr::library_version();
  return v.c_str();
}

const char* hfdr_last_error(void) { return last_error.c_str(); }

void hfdr_string_free(char* s) { std::free(s); }

hfdr_status hfdr_dataset_from_arrays(size_t n, size_t d, size_t q, const double* y, const int* status,
                                     const double* x, const double* z, hfdr_dataset** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    require(y, "y");
    require(status, "status");
    if (d > 0) require(x, "x");
    if (q > 0) require(z, "z");
    const auto ni = static_cast<hierfdr::Index>(n);
    const auto di = static_cast<hierfdr::Index>(d);
    const auto qi = static_cast<hierfdr::Index>(q);
    hierfdr::VectorXd yv = Eigen::Map<const hierfdr::VectorXd>(y, ni);
    hierfdr::VectorXi sv = Eigen::Map<const hierfdr::VectorXi>(status, ni);
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    hierfdr::MatrixXd xm = d > 0 ? hierfdr::MatrixXd(Eigen::Map<const RowMajor>(x, ni, di)) : hierfdr::MatrixXd(ni, 0);
    hierfdr::MatrixXd zm = q > 0 ? hierfdr::MatrixXd(Eigen::Map<const RowMajor>(z, ni, qi)) : hierfdr::MatrixXd(ni, 0);
    *out = new hfdr_dataset{hierfdr::SurvivalDataset(std::move(yv), std::move(sv), std::move(xm), std::move(zm))};
  });
}

hfdr_status hfdr_dataset_load_csv(const char* path, const char* schema_json, hfdr_dataset** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    require(path, "path");
    require(schema_json, "schema");
    const hierfdr::CsvSchema schema = hierfdr::CsvSchema::from_json(schema_json);
    *out = new hfdr_dataset{hierfdr::load_csv(path, schema)};
  });
}

hfdr_status hfdr_dataset_dims(const hfdr_dataset* ds, size_t* n, size_t* d, size_t* q) {
  return guarded([&] {
    require(ds, "dataset");
    if (n) *n = static_cast<size_t>(ds->data.n());
    if (d) *d = static_cast<size_t>(ds->data.d());
    if (q) *q = static_cast<size_t>(ds->data.q());
  });
}

void hfdr_dataset_free(hfdr_dataset* ds) { delete ds; }

hfdr_status hfdr_analyze(const hfdr_dataset* ds, const char* options_json, hfdr_analysis** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    require(ds, "dataset");
    *out = new hfdr_analysis{hierfdr::analyze(ds->data, parse_options(options_json))};
  });
}

hfdr_status hfdr_analysis_rejection_json(const hfdr_analysis* a, char** out) {
  return guarded([&] {
    require(a, "analysis");
    require(out, "out");
    *out = dup(a->report.rejection_json);
  });
}

hfdr_status hfdr_analysis_coefficients_csv(const hfdr_analysis* a, char** out) {
  return guarded([&] {
    require(a, "analysis");
    require(out, "out");
    *out = dup(hierfdr::coefficient_table_csv(a->report));
  });
}

hfdr_status hfdr_analysis_num_coefficients(const hfdr_analysis* a, size_t* p) {
  return guarded([&] {
    require(a, "analysis");
    require(p, "p");
    *p = static_cast<size_t>(a->report.analysis.stats.p());
  });
}

hfdr_status hfdr_analysis_u_statistics(const hfdr_analysis* a, double* u, unsigned char* valid, size_t p) {
  return guarded([&] {
    require(a, "analysis");
    const auto& stats = a->report.analysis.stats;
    if (p != static_cast<size_t>(stats.p())) {
      hierfdr::fail(hierfdr::ErrorCode::DimensionMismatch, "buffer length differs from the number of coefficients");
    }
    for (size_t l = 0; l < p; ++l) {
      if (u) u[l] = stats.u[static_cast<hierfdr::Index>(l)];
      if (valid) valid[l] = static_cast<unsigned char>(stats.valid[l]);
    }
  });
}

void hfdr_analysis_free(hfdr_analysis* a) { delete a; }

hfdr_status hfdr_inspect(const hfdr_dataset* ds, const char* what, const char* options_json, char** out) {
  return guarded([&] {
    require(ds, "dataset");
    require(what, "what");
    require(out, "out");
    *out = dup(hierfdr::inspect_csv(ds->data, what, parse_options(options_json)));
  });
}

hfdr_status hfdr_simulate(const char* config_json, const char* study_json, const char* sweep_field,
                          const double* sweep_values, size_t n_values, hfdr_study** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    const hierfdr::SimConfig config =
        config_json ? hierfdr::SimConfig::from_json(config_json) : hierfdr::SimConfig::desk();
    const hierfdr::StudyOptions options = parse_study(study_json);
    hierfdr::SweepSpec sweep;
    if (sweep_field != nullptr && *sweep_field != '\0') {
      sweep.field = sweep_field;
      if (n_values > 0) require(sweep_values, "sweep values");
      sweep.values.assign(sweep_values, sweep_values + n_values);
      // Reject an unknown field before any work is done.
      hierfdr::SimConfig probe = config;
      if (!sweep.values.empty()) probe.set_field(sweep.field, sweep.values.front());
      else probe.set_field(sweep.field, 0.0);
    }
    auto reports = hierfdr::run_sweep(config, sweep, options);
    *out = new hfdr_study{std::move(sweep), std::move(reports)};
  });
}

hfdr_status hfdr_study_aggregate_json(const hfdr_study* s, char** out) {
  return guarded([&] {
    require(s, "study");
    require(out, "out");
    *out = dup(hierfdr::aggregate_json(s->sweep, s->reports));
  });
}

hfdr_status hfdr_study_timing_json(const hfdr_study* s, char** out) {
  return guarded([&] {
    require(s, "study");
    require(out, "out");
    *out = dup(hierfdr::timing_json(s->sweep, s->reports));
  });
}

size_t hfdr_study_count(const hfdr_study* s) { return s ? s->reports.size() : 0; }

hfdr_status hfdr_study_replicates_csv(const hfdr_study* s, size_t index, char** out) {
  return guarded([&] {
    require(s, "study");
    require(out, "out");
    if (index >= s->reports.size()) hierfdr::fail(hierfdr::ErrorCode::InvalidArgument, "study index out of range");
    *out = dup(hierfdr::replicates_csv(s->reports[index]));
  });
}

void hfdr_study_free(hfdr_study* s) { delete s; }

hfdr_status hfdr_sim_config_resolve(const char* config_json, int paper_scale, char** out) {
  return guarded([&] {
    require(out, "out");
    const hierfdr::SimConfig base = paper_scale ? hierfdr::SimConfig::paper_scale() : hierfdr::SimConfig::desk();
    const hierfdr::SimConfig c = config_json ? hierfdr::SimConfig::from_json(config_json, base) : base;
    c.validate();
    *out = dup(c.to_json());
  });
}

hfdr_status hfdr_sha256_file(const char* path, char** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = dup(hierfdr::sha256_file(path));
  });
}

hfdr_status hfdr_utc_timestamp(char** out) {
  return guarded([&] {
    require(out, "out");
    *out = dup(hierfdr::utc_timestamp());
  });
}

}  // extern "C"
