#ifndef ZLAB_ZLAB_H
#define ZLAB_ZLAB_H

/*
 * C interface to libzlab.
 *
 * Every fallible call returns a zlab_status. On failure the message is kept
 * per thread and can be read with zlab_last_error() until the next failing
 * call on that thread. Objects are opaque handles released with the matching
 * *_free function; passing NULL to a *_free function is a no-op.
 *
 * Units: times in years, variances annualized (xi), daily statistics in
 * daily units unless stated otherwise.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ZLAB_API __declspec(dllexport)
#else
#define ZLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum zlab_status {
  ZLAB_OK = 0,
  ZLAB_ERR_DOMAIN = 1,        /* argument outside its domain or contract */
  ZLAB_ERR_PARSE = 2,         /* malformed input file */
  ZLAB_ERR_IO = 3,            /* file cannot be read or written */
  ZLAB_ERR_NUMERICAL = 4,     /* quadrature failure, non-finite values */
  ZLAB_ERR_GRID_MISMATCH = 5, /* inputs on incompatible grids */
  ZLAB_ERR_RESOURCE = 6,      /* memory guard exceeded */
  ZLAB_ERR_NULL_ARGUMENT = 7, /* required pointer was NULL */
  ZLAB_ERR_INTERNAL = 8
} zlab_status;

ZLAB_API const char* zlab_version(void);
ZLAB_API const char* zlab_last_error(void);
ZLAB_API const char* zlab_status_name(zlab_status status);
/* Line of the last parse error on this thread, 0 if none. */
ZLAB_API size_t zlab_last_error_line(void);

/* ---- special functions ------------------------------------------------ */

/* E_{alpha,beta}(-x) for x >= 0, alpha in (1/2, 1], beta in {1, 2, alpha}. */
ZLAB_API zlab_status zlab_ml_neg(double alpha, double beta, double x, double* out);
/* Mittag-Leffler density lambda x^{alpha-1} E_{alpha,alpha}(-lambda x^alpha) and its cdf. */
ZLAB_API zlab_status zlab_ml_density(double alpha, double lambda, double x, double* out);
ZLAB_API zlab_status zlab_ml_cdf(double alpha, double lambda, double x, double* out);
ZLAB_API zlab_status zlab_l2_norm_f_squared(double alpha, double lambda, double* out);

/* ---- forward variance curve ------------------------------------------- */

typedef struct zlab_curve zlab_curve;

ZLAB_API zlab_status zlab_curve_flat(double level, zlab_curve** out);
ZLAB_API zlab_status zlab_curve_piecewise(const double* t, const double* xi, size_t n, zlab_curve** out);
/* CSV with rows "t,xi"; '#' comments and one header row allowed. */
ZLAB_API zlab_status zlab_curve_load(const char* path, zlab_curve** out);
ZLAB_API zlab_status zlab_curve_eval(const zlab_curve* curve, double t, double* out);
ZLAB_API zlab_status zlab_curve_integral(const zlab_curve* curve, double a, double b, double* out);
ZLAB_API void zlab_curve_free(zlab_curve* curve);

/* ---- model ------------------------------------------------------------- */

typedef struct zlab_model_params {
  double hurst;  /* H in (0, 1/2] */
  double lambda; /* mean reversion, 1/year */
  double nu;     /* vol of vol, >= 0 */
  double rho;    /* spot-vol correlation in [-1, 1] */
} zlab_model_params;

/* H = 0.05, lambda = 0.3, nu = 0.45, rho = -0.7. */
ZLAB_API void zlab_model_params_default(zlab_model_params* p);
ZLAB_API zlab_status zlab_model_params_validate(const zlab_model_params* p);

/* Z_t(k) = Cov[r_t^2, s2_{t+k delta}] - Cov[r_{t+k delta}^2, s2_t]; t is the end of day t, in years. */
ZLAB_API zlab_status zlab_zumbach_cov(const zlab_model_params* p, const zlab_curve* xi, double t, int k,
                                      double delta, double* out);
ZLAB_API zlab_status zlab_zumbach_asymptotic(const zlab_model_params* p, const zlab_curve* xi, double t, int k,
                                             double delta, double* out);
ZLAB_API zlab_status zlab_g_alpha(double alpha, int k, double* out);
ZLAB_API zlab_status zlab_g0(const zlab_model_params* p, const zlab_curve* xi, double t, double* out);
ZLAB_API zlab_status zlab_var_sigma2(const zlab_model_params* p, const zlab_curve* xi, double t, double delta,
                                     double* out);
ZLAB_API zlab_status zlab_fourth_moment_r(const zlab_model_params* p, const zlab_curve* xi, double t,
                                          double delta, double* out);
ZLAB_API zlab_status zlab_stationary_var_sigma2(const zlab_model_params* p, double xi_inf, double delta,
                                                double* out);
ZLAB_API zlab_status zlab_stationary_fourth_moment_r(const zlab_model_params* p, double xi_inf, double delta,
                                                     double* out);

typedef struct zlab_correl {
  double value;       /* stationary correlation form of Z */
  double small_delta; /* its small-delta equivalent */
  double cov;
  double var_sigma2;
  double var_r2;
  int out_of_range;   /* 1 when |value| > 1 */
} zlab_correl;

ZLAB_API zlab_status zlab_zumbach_correl(const zlab_model_params* p, double xi_inf, int k, double delta,
                                         zlab_correl* out);

/* ---- simulation --------------------------------------------------------- */

typedef enum zlab_scheme { ZLAB_SCHEME_INTEGRATED_VARIANCE = 0, ZLAB_SCHEME_EULER = 1 } zlab_scheme;

typedef struct zlab_sim_config {
  int64_t n_paths;
  int steps_per_day;
  int n_days;
  double delta; /* years per day */
  uint64_t seed;
  int antithetic;
  zlab_scheme scheme;
  int threads;
  int chunk_paths;
  size_t memory_limit; /* bytes */
} zlab_sim_config;

ZLAB_API void zlab_sim_config_default(zlab_sim_config* c);
ZLAB_API zlab_status zlab_sim_config_validate(const zlab_sim_config* c);
ZLAB_API zlab_status zlab_sim_memory_estimate(const zlab_sim_config* c, size_t* bytes);

typedef struct zlab_paths zlab_paths;

ZLAB_API zlab_status zlab_simulate(const zlab_model_params* p, const zlab_curve* xi, const zlab_sim_config* c,
                                   zlab_paths** out);
ZLAB_API zlab_status zlab_paths_info(const zlab_paths* b, int64_t* n_paths, int* n_days,
                                     double* truncated_fraction, uint64_t* kernel_checksum);
/* day is 1-based. */
ZLAB_API zlab_status zlab_paths_get(const zlab_paths* b, int64_t path, int day, double* r, double* s2);

typedef struct zlab_estimate {
  double value;
  double std_error;
} zlab_estimate;

ZLAB_API zlab_status zlab_paths_zumbach(const zlab_paths* b, int t_day, int k, zlab_estimate* cov,
                                        zlab_estimate* expectation);

typedef struct zlab_moments {
  zlab_estimate mean_sigma2;
  zlab_estimate mean_r2;
  zlab_estimate var_sigma2;
  zlab_estimate fourth_moment_r;
  int64_t samples;
} zlab_moments;

ZLAB_API zlab_status zlab_paths_moments(const zlab_paths* b, int t_day, zlab_moments* out);
/* path_id,day,r,sigma2 */
ZLAB_API zlab_status zlab_paths_write_csv(const zlab_paths* b, const char* path);
/* index_id,date,r,s2 with one index per path named prefix + number. */
ZLAB_API zlab_status zlab_paths_write_generic(const zlab_paths* b, const char* path, const char* prefix);
ZLAB_API void zlab_paths_free(zlab_paths* b);

/* ---- empirical ------------------------------------------------------------ */

typedef enum zlab_format { ZLAB_FORMAT_GENERIC = 0, ZLAB_FORMAT_OXFORD = 1 } zlab_format;

typedef struct zlab_dataset zlab_dataset;

/* variance_column may be NULL (defaults to rk_parzen; Oxford format only). */
ZLAB_API zlab_status zlab_dataset_load(const char* path, zlab_format format, const char* variance_column,
                                       zlab_dataset** out);
ZLAB_API zlab_status zlab_dataset_create(zlab_dataset** out);
/* Appends a gap-free series dated on consecutive business days. */
ZLAB_API zlab_status zlab_dataset_add_series(zlab_dataset* d, const char* index_id, const double* r,
                                             const double* s2, size_t n);
ZLAB_API size_t zlab_dataset_size(const zlab_dataset* d);
/* The id pointer stays valid until the dataset is freed. */
ZLAB_API zlab_status zlab_dataset_series_info(const zlab_dataset* d, size_t i, const char** index_id,
                                              size_t* n_obs, size_t* n_gaps);
ZLAB_API size_t zlab_dataset_warning_count(const zlab_dataset* d);
ZLAB_API const char* zlab_dataset_warning(const zlab_dataset* d, size_t i);
ZLAB_API void zlab_dataset_free(zlab_dataset* d);

typedef struct zlab_empirical_options {
  size_t min_pairs; /* default 30 */
  int demean;
  double winsorize; /* quantile in [0, 0.5); 0 disables */
  int annualize;    /* s2 * 252 */
  int threads;
} zlab_empirical_options;

ZLAB_API void zlab_empirical_options_default(zlab_empirical_options* o);
ZLAB_API zlab_status zlab_c2(const zlab_dataset* d, size_t index, int tau, const zlab_empirical_options* o,
                             double* out);

typedef struct zlab_tra zlab_tra;

typedef struct zlab_tra_row {
  int tau;
  double c2_fwd, c2_bwd;
  double rho_fwd, rho_bwd;
  double z;
  double delta_cum;
  int64_t n_obs;
} zlab_tra_row;

ZLAB_API zlab_status zlab_tra_compute(const zlab_dataset* d, size_t index, int tau_max,
                                      const zlab_empirical_options* o, zlab_tra** out);
/* Curves for every series of the dataset, in dataset order. out must hold zlab_dataset_size(d) pointers. */
ZLAB_API zlab_status zlab_tra_compute_all(const zlab_dataset* d, int tau_max, const zlab_empirical_options* o,
                                          zlab_tra** out);
ZLAB_API zlab_status zlab_tra_average(const zlab_tra* const* curves, size_t n, zlab_tra** out);
ZLAB_API size_t zlab_tra_size(const zlab_tra* c);
ZLAB_API zlab_status zlab_tra_get(const zlab_tra* c, size_t i, zlab_tra_row* row);
ZLAB_API zlab_status zlab_tra_integrated_difference(const zlab_tra* c, int tau, double* out);
/* format: 0 = CSV, 1 = JSON. */
ZLAB_API zlab_status zlab_tra_write(const zlab_tra* c, const char* path, int format);
ZLAB_API zlab_status zlab_tra_read_csv(const char* path, zlab_tra** out);
ZLAB_API void zlab_tra_free(zlab_tra* c);

#ifdef __cplusplus
}
#endif

#endif /* ZLAB_ZLAB_H */
