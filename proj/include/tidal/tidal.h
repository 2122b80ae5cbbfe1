/*
 * C interface to the tidal breathing analysis library.
 *
 * Conventions:
 *  - Every fallible function returns a tidal_status; TIDAL_OK is 0.
 *  - On failure, tidal_last_error() returns a message for the calling thread
 *    until the next call into the library from that thread.
 *  - Objects are opaque handles created by *_create / *_fit / *_read and
 *    released by the matching *_free. Passing NULL to *_free is a no-op.
 *  - Strings returned through char** are owned by the caller and released
 *    with tidal_string_free.
 */
#ifndef TIDAL_TIDAL_H
#define TIDAL_TIDAL_H

#include <stddef.h>
#include <stdint.h>

#if defined(TIDAL_BUILDING_LIBRARY)
#define TIDAL_API __attribute__((visibility("default")))
#else
#define TIDAL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tidal_status {
  TIDAL_OK = 0,
  TIDAL_ERR_INVALID_PARAMETER = 1,
  TIDAL_ERR_INVALID_INPUT = 2,
  TIDAL_ERR_INSUFFICIENT_DATA = 3,
  TIDAL_ERR_DEGENERATE_INPUT = 4,
  TIDAL_ERR_SINGULAR_DESIGN = 5,
  TIDAL_ERR_MISSING_FEATURE = 6,
  TIDAL_ERR_INVALID_LABEL = 7,
  TIDAL_ERR_FOLD_FAILURE = 8,
  TIDAL_ERR_DEGENERATE_TRAINING = 9,
  TIDAL_ERR_PARSE = 10,
  TIDAL_ERR_IO = 11,
  TIDAL_ERR_NULL_ARGUMENT = 12,
  TIDAL_ERR_INTERNAL = 13
} tidal_status;

typedef enum tidal_rmse_denominator {
  TIDAL_RMSE_N = 0,
  TIDAL_RMSE_N_MINUS_K_MINUS_1 = 1
} tidal_rmse_denominator;

typedef enum tidal_knn_scaling {
  TIDAL_KNN_ZSCORE = 0,
  TIDAL_KNN_RAW = 1
} tidal_knn_scaling;

typedef enum tidal_obstruction {
  TIDAL_NORMAL = 0,
  TIDAL_OBSTRUCTED = 1
} tidal_obstruction;

typedef enum tidal_severity {
  TIDAL_MILD = 0,
  TIDAL_MODERATE = 1,
  TIDAL_SEVERE = 2,
  TIDAL_VERY_SEVERE = 3
} tidal_severity;

typedef enum tidal_coarse_severity {
  TIDAL_MILD_MODERATE = 0,
  TIDAL_SEVERE_VERY_SEVERE = 1
} tidal_coarse_severity;

typedef struct tidal_breath_cycle {
  size_t trough_idx;
  size_t peak_idx;
  size_t end_trough_idx;
  double t_i_s;
  double t_tot_s;
  double ra_n;
} tidal_breath_cycle;

typedef struct tidal_features {
  double fit;
  double rr;
  double tv;
  size_t n_cycles;
} tidal_features;

typedef struct tidal_breath_profile {
  double t_i_s;
  double t_tot_s;
  double ra_n;
  double jitter_t_tot;
  double jitter_fit;
  double jitter_ra;
  double drift_slope_n_per_s;
  uint64_t seed;
} tidal_breath_profile;

typedef struct tidal_signal tidal_signal;
typedef struct tidal_cycle_list tidal_cycle_list;
typedef struct tidal_regression tidal_regression;
typedef struct tidal_knn tidal_knn;
typedef struct tidal_confusion tidal_confusion;

/* ------------------------------------------------------------- general */

TIDAL_API const char* tidal_version(void);
TIDAL_API const char* tidal_last_error(void);
TIDAL_API const char* tidal_status_name(tidal_status status);
/* 0 for TIDAL_OK, 2 for input errors, 3 for analysis errors. */
TIDAL_API int tidal_exit_code(tidal_status status);
TIDAL_API void tidal_string_free(char* s);

/* ------------------------------------------------------------- signals */

TIDAL_API tidal_status tidal_signal_create(const double* samples, size_t n, double sample_rate_hz,
                                           const char* subject_id, tidal_signal** out);
TIDAL_API tidal_status tidal_signal_read_csv(const char* path, const char* subject_id,
                                             tidal_signal** out);
TIDAL_API void tidal_signal_free(tidal_signal* signal);
TIDAL_API size_t tidal_signal_length(const tidal_signal* signal);
TIDAL_API double tidal_signal_rate(const tidal_signal* signal);
TIDAL_API const double* tidal_signal_samples(const tidal_signal* signal);

TIDAL_API tidal_status tidal_detrend(const tidal_signal* signal, double window_s,
                                     tidal_signal** out);
/* min_prominence_n <= 0 selects the default of 0.1 x interquartile range. */
TIDAL_API tidal_status tidal_segment(const tidal_signal* signal, double min_cycle_s,
                                     double min_prominence_n, tidal_cycle_list** out);
TIDAL_API void tidal_cycle_list_free(tidal_cycle_list* list);
TIDAL_API size_t tidal_cycle_list_size(const tidal_cycle_list* list);
TIDAL_API tidal_status tidal_cycle_list_get(const tidal_cycle_list* list, size_t index,
                                            tidal_breath_cycle* out);
TIDAL_API tidal_status tidal_select_clean_region(const tidal_cycle_list* cycles,
                                                 const tidal_signal* signal, size_t min_cycles,
                                                 size_t* first, size_t* count, double* quality);

/* ------------------------------------------------------------ features */

TIDAL_API tidal_status tidal_extract_features(const tidal_cycle_list* cycles, size_t first,
                                              size_t count, double bmi, tidal_features* out);

/* --------------------------------------------------------------- stats */

TIDAL_API tidal_status tidal_student_t_sf(double t, double df, double* out);
TIDAL_API tidal_status tidal_f_sf(double f, double d1, double d2, double* out);
TIDAL_API tidal_status tidal_p_from_r2(double r_squared, size_t n, double* out);
TIDAL_API tidal_status tidal_p_from_f(double r_squared, size_t k, size_t n, double* out);
TIDAL_API tidal_status tidal_pearson(const double* x, const double* y, size_t n,
                                     double* r_squared, double* p_value);

/* x is row-major n x k without an intercept column. */
TIDAL_API tidal_status tidal_ols_fit(const double* x, size_t n, size_t k, const double* y,
                                     const char* const* names, tidal_rmse_denominator denominator,
                                     const char* model_name, tidal_regression** out);
TIDAL_API tidal_status tidal_regression_from_json(const char* json, tidal_regression** out);
TIDAL_API tidal_status tidal_regression_to_json(const tidal_regression* model, char** json);
TIDAL_API void tidal_regression_free(tidal_regression* model);
TIDAL_API tidal_status tidal_regression_predict(const tidal_regression* model,
                                                const char* const* names, const double* values,
                                                size_t count, double* out);
TIDAL_API double tidal_regression_intercept(const tidal_regression* model);
TIDAL_API double tidal_regression_r_squared(const tidal_regression* model);
TIDAL_API double tidal_regression_p_value(const tidal_regression* model);
TIDAL_API double tidal_regression_rmse(const tidal_regression* model);
TIDAL_API size_t tidal_regression_coefficient_count(const tidal_regression* model);
TIDAL_API tidal_status tidal_regression_coefficient(const tidal_regression* model, size_t index,
                                                    const char** name, double* value);

/* ------------------------------------------------------------ classify */

TIDAL_API tidal_status tidal_label_obstruction(double fev1_fvc, tidal_obstruction* out);
TIDAL_API tidal_status tidal_severity_stage(double pct_pred_fev1, tidal_severity* out);
TIDAL_API tidal_coarse_severity tidal_coarse_stage(tidal_severity stage);

TIDAL_API tidal_status tidal_knn_fit(const tidal_features* points, const tidal_obstruction* labels,
                                     size_t n, size_t k, tidal_knn_scaling scaling,
                                     tidal_knn** out);
TIDAL_API tidal_status tidal_knn_predict(const tidal_knn* model, const tidal_features* query,
                                         tidal_obstruction* out);
TIDAL_API tidal_status tidal_knn_to_json(const tidal_knn* model, char** json);
TIDAL_API tidal_status tidal_knn_from_json(const char* json, tidal_knn** out);
TIDAL_API void tidal_knn_free(tidal_knn* model);

/* pct_pred[i] is the response for points[i]; fills a model of (fit, rr, tv). */
TIDAL_API tidal_status tidal_severity_fit(const tidal_features* points, const double* pct_pred,
                                          size_t n, tidal_regression** out);

/* Leave-one-out predictions, predicted[i] from a model trained without i. */
TIDAL_API tidal_status tidal_knn_loocv(const tidal_features* points,
                                       const tidal_obstruction* labels, size_t n, size_t k,
                                       tidal_knn_scaling scaling, tidal_obstruction* predicted);
TIDAL_API tidal_status tidal_severity_loocv(const tidal_features* points, const double* pct_pred,
                                            size_t n, double* estimated);

/* ---------------------------------------------------------------- eval */

TIDAL_API tidal_status tidal_confusion_create(const char* const* classes, size_t n_classes,
                                              const char* positive_class,
                                              const char* const* truth,
                                              const char* const* predicted, size_t n_pairs,
                                              tidal_confusion** out);
TIDAL_API void tidal_confusion_free(tidal_confusion* cm);
TIDAL_API size_t tidal_confusion_count(const tidal_confusion* cm, size_t true_index,
                                       size_t predicted_index);
/* name: sensitivity, specificity, balanced_accuracy, precision, f1,
 * raw_accuracy or kappa. *defined is 0 when the metric is 0/0. */
TIDAL_API tidal_status tidal_confusion_metric(const tidal_confusion* cm, const char* name,
                                              double* value, int* defined);
TIDAL_API tidal_status tidal_confusion_report_json(const tidal_confusion* cm, const char* task,
                                                   char** json);

/* --------------------------------------------------------------- synth */

TIDAL_API tidal_status tidal_generate_signal(const tidal_breath_profile* profile,
                                             double duration_s, double sample_rate_hz,
                                             tidal_signal** signal, tidal_cycle_list** truth);

/* ------------------------------------------------------------ commands */

/* Runs a command described by a run manifest
 * {"command": ..., "parameters": {name: string}, ...}. On return *summary
 * (if non-NULL) holds {"manifest", "outputs", "warnings"} for successful
 * runs. */
TIDAL_API tidal_status tidal_run(const char* manifest_json, char** summary);

#ifdef __cplusplus
}
#endif

#endif /* TIDAL_TIDAL_H */
