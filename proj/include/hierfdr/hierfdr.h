/* C interface to the hierfdr library. Every function returns an hfdr_status;
 * on failure hfdr_last_error() describes the most recent error of the calling
 * thread. Strings returned through char** are owned by the caller and must be
 * released with hfdr_string_free. */
#ifndef HIERFDR_H
#define HIERFDR_H

#include <stddef.h>
#include <stdint.h>

#if defined(HIERFDR_BUILDING_LIBRARY)
#define HFDR_API __attribute__((visibility("default")))
#else
#define HFDR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hfdr_status {
  HFDR_OK = 0,
  HFDR_E_INVALID_ARGUMENT = 1,
  HFDR_E_IO = 2,
  HFDR_E_PARSE = 3,
  HFDR_E_DIMENSION = 4,
  HFDR_E_NONCONVERGENCE = 5,
  HFDR_E_INFEASIBLE = 6,
  HFDR_E_INTERNAL = 7
} hfdr_status;

typedef struct hfdr_dataset hfdr_dataset;
typedef struct hfdr_analysis hfdr_analysis;
typedef struct hfdr_study hfdr_study;

HFDR_API const char* hfdr_version(void);
HFDR_API const char* hfdr_last_error(void);
HFDR_API void hfdr_string_free(char* s);

/* y holds log survival times; x is n-by-d and z is n-by-q, both row-major. */
HFDR_API hfdr_status hfdr_dataset_from_arrays(size_t n, size_t d, size_t q, const double* y, const int* status,
                                              const double* x, const double* z, hfdr_dataset** out);
/* schema_json: {"time", "status", "z": [...], "x": [...] | "*", "time_scale": "raw"|"log", "delimiter"}. */
HFDR_API hfdr_status hfdr_dataset_load_csv(const char* path, const char* schema_json, hfdr_dataset** out);
HFDR_API hfdr_status hfdr_dataset_dims(const hfdr_dataset* ds, size_t* n, size_t* d, size_t* q);
HFDR_API void hfdr_dataset_free(hfdr_dataset* ds);

/* options_json may be NULL for defaults. */
HFDR_API hfdr_status hfdr_analyze(const hfdr_dataset* ds, const char* options_json, hfdr_analysis** out);
HFDR_API hfdr_status hfdr_analysis_rejection_json(const hfdr_analysis* a, char** out);
HFDR_API hfdr_status hfdr_analysis_coefficients_csv(const hfdr_analysis* a, char** out);
HFDR_API hfdr_status hfdr_analysis_num_coefficients(const hfdr_analysis* a, size_t* p);
/* u and valid must hold p entries. */
HFDR_API hfdr_status hfdr_analysis_u_statistics(const hfdr_analysis* a, double* u, unsigned char* valid, size_t p);
HFDR_API void hfdr_analysis_free(hfdr_analysis* a);

/* what: "weights", "ustats" or "gram-diag". */
HFDR_API hfdr_status hfdr_inspect(const hfdr_dataset* ds, const char* what, const char* options_json, char** out);

/* config_json: simulation fields; study_json: {"methods", "threads", "record_timing",
 * "bh_hierarchy", "mcp_xi", "analysis"}; sweep_field may be NULL. */
HFDR_API hfdr_status hfdr_simulate(const char* config_json, const char* study_json, const char* sweep_field,
                                   const double* sweep_values, size_t n_values, hfdr_study** out);
HFDR_API hfdr_status hfdr_study_aggregate_json(const hfdr_study* s, char** out);
HFDR_API hfdr_status hfdr_study_timing_json(const hfdr_study* s, char** out);
HFDR_API size_t hfdr_study_count(const hfdr_study* s);
HFDR_API hfdr_status hfdr_study_replicates_csv(const hfdr_study* s, size_t index, char** out);
HFDR_API void hfdr_study_free(hfdr_study* s);

/* Resolved simulation config as JSON; paper_scale selects the larger preset as base. */
HFDR_API hfdr_status hfdr_sim_config_resolve(const char* config_json, int paper_scale, char** out);
HFDR_API hfdr_status hfdr_sha256_file(const char* path, char** out);
HFDR_API hfdr_status hfdr_utc_timestamp(char** out);

#ifdef __cplusplus
}
#endif

#endif
