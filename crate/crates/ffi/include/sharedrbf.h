#ifndef SHAREDRBF_H
#define SHAREDRBF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SrbfThetaPrior {
  SRBF_THETA_PRIOR_ZERO = 0,
  SRBF_THETA_PRIOR_LEAST_SQUARES = 1,
} SrbfThetaPrior;

/*
 Result codes.
 */
typedef enum SrbfStatus {
  SRBF_STATUS_OK = 0,
  SRBF_STATUS_NULL_POINTER = 1,
  SRBF_STATUS_INVALID_UTF8 = 2,
  SRBF_STATUS_INVALID_ARGUMENT = 3,
  /*
   Malformed or unusable input data.
   */
  SRBF_STATUS_DATA = 4,
  SRBF_STATUS_IO = 5,
  SRBF_STATUS_NUMERICAL = 6,
  SRBF_STATUS_PANIC = 7,
} SrbfStatus;

/*
 A posterior chain plus what is needed to save it again.
 */
typedef struct SrbfChain SrbfChain;

/*
 A loaded dataset.
 */
typedef struct SrbfDataset SrbfDataset;

/*
 Chain and initialization settings; start from [`srbf_fit_options_default`].
 */
typedef struct SrbfFitOptions {
  size_t n_iter;
  size_t n_burn;
  size_t n_fixed_gamma;
  size_t tune_interval;
  double acc_low;
  double acc_high;
  double epsilon0;
  size_t recalib_interval;
  uint64_t seed;
  double ewkm_lambda;
  size_t ewkm_max_iter;
  double jitter_sd;
  enum SrbfThetaPrior theta_prior;
} SrbfFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. Valid until the
 next call into this library from the same thread.
 */
const char *srbf_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *srbf_version(void);

struct SrbfFitOptions srbf_fit_options_default(void);

/*
 Loads a CSV with `treatment` and `outcome` columns. `nominal`/`ordinal`
 list column names (either may be NULL when its count is 0).

 # Safety
 Pointers must be valid for the given lengths; `out` receives a handle
 owned by the caller.
 */
enum SrbfStatus srbf_dataset_load(const char *path,
                                  const char *const *nominal,
                                  size_t n_nominal,
                                  const char *const *ordinal,
                                  size_t n_ordinal,
                                  struct SrbfDataset **out);

/*
 # Safety
 `ds` must be NULL or a handle from [`srbf_dataset_load`] not yet freed.
 */
void srbf_dataset_free(struct SrbfDataset *ds);

/*
 Rows, covariate columns and treatment groups. Any out pointer may be NULL.

 # Safety
 `ds` must be a live dataset handle.
 */
enum SrbfStatus srbf_dataset_shape(const struct SrbfDataset *ds,
                                   size_t *n_rows,
                                   size_t *n_covariates,
                                   size_t *n_groups);

/*
 Fits the model. `options` may be NULL for defaults.

 # Safety
 `ds` must be a live dataset handle; `out` receives a chain handle.
 */
enum SrbfStatus srbf_fit(const struct SrbfDataset *ds,
                         const struct SrbfFitOptions *options,
                         struct SrbfChain **out);

/*
 # Safety
 `chain` must be NULL or a live chain handle.
 */
void srbf_chain_free(struct SrbfChain *chain);

/*
 Posterior samples, treatment groups and raw covariate columns expected by
 [`srbf_predict_cate`]. Any out pointer may be NULL.

 # Safety
 `chain` must be a live chain handle.
 */
enum SrbfStatus srbf_chain_shape(const struct SrbfChain *chain,
                                 size_t *n_samples,
                                 size_t *n_groups,
                                 size_t *n_covariates);

/*
 # Safety
 `chain` must be a live chain handle and `path` a NUL-terminated string.
 */
enum SrbfStatus srbf_chain_save(const struct SrbfChain *chain, const char *path);

/*
 # Safety
 `path` must be a NUL-terminated string; `out` receives a chain handle.
 */
enum SrbfStatus srbf_chain_load(const char *path, struct SrbfChain **out);

/*
 Posterior CATE `tau_{g,g'}` on the original outcome scale for `n_rows`
 rows of raw covariates `x` (row-major, `n_cols` columns in training
 order). `g` and `g2` are one-based treatment labels. Writes the posterior
 mean and the 2.5% / 97.5% quantiles; `lower`/`upper` may be NULL.

 # Safety
 `x` must hold `n_rows * n_cols` values and each non-NULL output `n_rows`.
 */
enum SrbfStatus srbf_predict_cate(const struct SrbfChain *chain,
                                  const double *x,
                                  size_t n_rows,
                                  size_t n_cols,
                                  size_t g,
                                  size_t g2,
                                  double *mean,
                                  double *lower,
                                  double *upper);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHAREDRBF_H */
