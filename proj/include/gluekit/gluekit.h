#ifndef GLUEKIT_H
#define GLUEKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GK_API __declspec(dllexport)
#else
#define GK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; the nonzero values double as CLI exit codes. */
typedef enum gk_status {
  GK_OK = 0,
  GK_ERR_CONFIG = 2,
  GK_ERR_DATA = 3,
  GK_ERR_NUMERICAL = 4,
  GK_ERR_INTERNAL = 5
} gk_status;

typedef struct gk_config gk_config;
typedef struct gk_report gk_report;
typedef struct gk_ensemble gk_ensemble;

typedef struct gk_glue_result {
  double capacity, capacity_se;
  double dimension, dimension_se;
  double radius, radius_se;
  double center_align, center_align_se;
  double axis_align, axis_align_se;
  double center_axis_align, center_axis_align_se;
  size_t n_draws;
  int degenerate;
} gk_glue_result;

GK_API const char* gk_version(void);
/* Message of the last failed call on this thread ("" if none). */
GK_API const char* gk_last_error(void);
/* Frees strings returned through char** out-parameters. */
GK_API void gk_string_free(char* s);

GK_API size_t gk_kind_count(void);
GK_API const char* gk_kind_name(size_t i);
GK_API size_t gk_preset_count(void);
GK_API const char* gk_preset_name(size_t i);

/* Experiment configs */
GK_API gk_status gk_config_new(const char* kind, gk_config** out);
GK_API gk_status gk_config_from_file(const char* path, gk_config** out);
GK_API gk_status gk_config_from_json(const char* text, gk_config** out);
GK_API gk_status gk_config_from_preset(const char* name, gk_config** out);
/* "key=value"; bare keys address the parameter block. */
GK_API gk_status gk_config_set(gk_config* config, const char* assignment);
/* Validated config with defaults filled in, as JSON. */
GK_API gk_status gk_config_resolved(const gk_config* config, char** json_out);
GK_API void gk_config_free(gk_config* config);

/* Runs and reports */
GK_API gk_status gk_run(const gk_config* config, gk_report** out);
GK_API gk_status gk_report_emit(const gk_report* report, const char* dir);
GK_API gk_status gk_report_summary(const gk_report* report, char** text_out);
GK_API size_t gk_report_table_count(const gk_report* report);
GK_API const char* gk_report_table_name(const gk_report* report, size_t i);
GK_API gk_status gk_report_table_shape(const gk_report* report, const char* table, size_t* rows, size_t* cols);
GK_API gk_status gk_report_value(const gk_report* report, const char* table, size_t row, const char* column,
                                 double* out);
GK_API void gk_report_free(gk_report* report);

/* Direct analysis of activations */
GK_API gk_status gk_ensemble_load(const char* path, const char* labels_path, gk_ensemble** out);
/* Row-major rows x cols samples with one label per row. */
GK_API gk_status gk_ensemble_from_array(const double* data, size_t rows, size_t cols, const int64_t* labels,
                                        gk_ensemble** out);
GK_API gk_status gk_ensemble_shape(const gk_ensemble* ensemble, size_t* manifolds, size_t* dim, size_t* points);
GK_API void gk_ensemble_free(gk_ensemble* ensemble);

/* threads = 0 uses GLUEKIT_THREADS or the hardware default. */
GK_API gk_status gk_glue_estimate(const gk_ensemble* ensemble, size_t n_draws, uint64_t seed, unsigned threads,
                                  gk_glue_result* out);
GK_API gk_status gk_simulated_capacity(const gk_ensemble* ensemble, size_t trials, uint64_t seed, unsigned threads,
                                       double* alpha, size_t* critical_dim);
GK_API gk_status gk_cover_prob(size_t dim, size_t points, double* out);

#ifdef __cplusplus
}
#endif

#endif
