#ifndef ABCF_H
#define ABCF_H

/* C interface to the aggregate Bayesian causal forest library.
 *
 * Conventions:
 *   - Every fallible call returns a status code (ABCF_OK on success) and
 *     leaves a human-readable message for the calling thread in
 *     abcf_last_error() on failure.
 *   - Objects returned through out-parameters are owned by the caller and
 *     released with the matching _free function. Strings returned through
 *     out-parameters are released with abcf_string_free.
 *   - Borrowed pointers (accessors returning const double*) stay valid until
 *     the owning object is freed or mutated.
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
  ABCF_OK = 0,
  ABCF_ERR_USAGE = 1,   /* bad arguments or configuration */
  ABCF_ERR_DATA = 2,    /* malformed or inconsistent data */
  ABCF_ERR_NUMERIC = 3  /* numerical failure */
};

/* Library version as "major.minor.patch". */
const char* abcf_version(void);

/* Message from this thread's most recent failing call; empty string if none. */
const char* abcf_last_error(void);

void abcf_string_free(char* s);

/* ---------- datasets ---------- */

typedef struct abcf_dataset abcf_dataset;

/* Columns: unit id, outcome y, treatment z in {0,1}, size w >= 1, propensity
 * pi in (0,1), covariates. Column names may be remapped via the schema string
 * "unit_id=...,y=...,z=...,w=...,pi=..." (empty or NULL keeps defaults;
 * covariate columns are every remaining numeric column in file order). */
int abcf_dataset_load(const char* path, const char* schema, abcf_dataset** out);
int abcf_dataset_write(const abcf_dataset* d, const char* path);

/* In-memory construction; x is row-major n-by-p, ids may be NULL for 1..n. */
int abcf_dataset_create(int n, int p, const char* const* unit_ids, const double* y,
                        const int* z, const double* w, const double* pi,
                        const double* x, abcf_dataset** out);

int abcf_dataset_n(const abcf_dataset* d);
int abcf_dataset_p(const abcf_dataset* d);
int abcf_dataset_n_treated(const abcf_dataset* d);
/* Summary (unit counts, size quantiles, weighted outcome moments) as JSON. */
int abcf_dataset_summary_json(const abcf_dataset* d, char** out);
void abcf_dataset_free(abcf_dataset* d);

/* ---------- simulation ---------- */

typedef struct abcf_truth abcf_truth;

typedef struct abcf_dgp_config {
  int n_units;
  int n_treated;
  int n_covariates;
  double sd_y_target, sd_mu_target, sd_tau_target;
  double sigma_u, sigma_eps, sigma_v, rho;
  double residual_share; /* < 0 leaves (sigma_u, sigma_eps) as given */
  uint64_t seed;
} abcf_dgp_config;

/* Fills the calibrated defaults (3000 units, 1/3 treated, sigma_u 61, ...). */
void abcf_dgp_config_init(abcf_dgp_config* cfg);

/* One replicate of the design; replicates are independent streams of the
 * seed, so any index is reproducible in isolation. */
int abcf_simulate(const abcf_dgp_config* cfg, uint64_t replicate_index,
                  abcf_dataset** data, abcf_truth** truth);

int abcf_truth_write(const abcf_truth* t, const abcf_dataset* d, const char* path);
int abcf_truth_load(const char* path, abcf_truth** out);
double abcf_truth_satt(const abcf_truth* t);
double abcf_truth_sigma_u(const abcf_truth* t);
void abcf_truth_free(abcf_truth* t);

/* ---------- fitting ---------- */

typedef struct abcf_draws abcf_draws;

enum { ABCF_MODEL_BCF = 0, ABCF_MODEL_ABCF = 1, ABCF_MODEL_IBCF = 2 };

typedef struct abcf_fit_config {
  int model; /* ABCF_MODEL_* */
  int n_burn, n_draw, thinning;
  int n_trees_mu, n_trees_tau, n_cutpoints;
  double sigma_u_prior_scale_multiplier;
  double psi;
  double pin_sigma_u, pin_sigma_v, pin_rho; /* NaN leaves the parameter free */
  int disable_adaptation;
  double initial_proposal_sd; /* NaN keeps per-parameter defaults */
  uint64_t seed;
} abcf_fit_config;

void abcf_fit_config_init(abcf_fit_config* cfg);

int abcf_fit(const abcf_dataset* d, const abcf_fit_config* cfg, abcf_draws** out);

/* Draws directory: scalars.csv, mu.csv, tau.csv (u.csv/v.csv per model),
 * report.json. */
int abcf_draws_write(const abcf_draws* dr, const char* dir);
int abcf_draws_load(const char* dir, abcf_draws** out);
int abcf_draws_report_json(const abcf_draws* dr, char** out);

int abcf_draws_model(const abcf_draws* dr);
int abcf_draws_n_kept(const abcf_draws* dr);
int abcf_draws_n_units(const abcf_draws* dr);
/* Per-draw series: "sigma_eps", "sigma_u", "sigma_v", "rho", "b0", "b1";
 * length abcf_draws_n_kept. NULL when the model lacks the series. */
const double* abcf_draws_series(const abcf_draws* dr, const char* name, int* len);
/* Draw-major matrices: "mu", "tau", "u", "v"; value(k, j) = m[k*n_units + j]. */
const double* abcf_draws_matrix(const abcf_draws* dr, const char* name, int* n_kept,
                                int* n_units);
void abcf_draws_free(abcf_draws* dr);

/* ---------- evaluation ---------- */

typedef struct abcf_metrics abcf_metrics;

abcf_metrics* abcf_metrics_new(void);
void abcf_metrics_free(abcf_metrics* m);

/* Scores one fitted replicate and appends long-format rows (satt, ute,
 * exemplar, variance-parameter metrics) under the given model label.
 * ute_truth_includes_v = 0 scores unit effects against tau alone. */
int abcf_evaluate(abcf_metrics* m, const abcf_draws* dr, const abcf_truth* t,
                  const abcf_dataset* d, const char* model_label, int replicate_id,
                  int ute_truth_includes_v);

int abcf_metrics_count(const abcf_metrics* m);
/* Canonical row order (replicate, model, estimand, metric); makes outputs
 * independent of the completion order of concurrent evaluations. */
int abcf_metrics_sort(abcf_metrics* m);
/* Mean of a metric across replicates for one model; count_out may be NULL. */
int abcf_metrics_mean(const abcf_metrics* m, const char* model, const char* estimand,
                      const char* metric, double* out, int* count_out);
int abcf_metrics_write_csv(const abcf_metrics* m, const char* path);
int abcf_metrics_load_csv(const char* path, abcf_metrics** out);

/* Paired per-replicate contrast of two model labels over every shared metric;
 * writes the comparison table (mean_a, mean_b, difference, se, significant,
 * pct_improvement). */
int abcf_compare_write_csv(const abcf_metrics* m, const char* model_a,
                           const char* model_b, const char* path);

#ifdef __cplusplus
}
#endif

#endif /* ABCF_H */
