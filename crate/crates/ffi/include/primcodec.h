#ifndef PRIMCODEC_H
#define PRIMCODEC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status of a call. The numeric values of the error classes match the
 * CLI exit codes.
 */
typedef enum {
  PC_STATUS_OK = 0,
  PC_STATUS_NULL_POINTER = 1,
  PC_STATUS_CONFIG = 2,
  PC_STATUS_NUMERIC = 3,
  PC_STATUS_IO = 4,
  PC_STATUS_BUFFER_SIZE = 5,
  PC_STATUS_PANIC = 6,
} PcStatus;

/**
 * Generated or loaded motion dataset.
 */
typedef struct PcDataset PcDataset;

/**
 * Trained decoder.
 */
typedef struct PcModel PcModel;

/**
 * Gaussian projection matrix.
 */
typedef struct PcProjection PcProjection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pc_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *pc_last_error(void);

/**
 * Releases a string returned by the library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void pc_string_free(char *s);

/**
 * Builds a dataset from a JSON generation config.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` writable.
 */
PcStatus pc_dataset_generate(const char *config_json, PcDataset **out);

/**
 * # Safety
 * `dir` must be a NUL-terminated path and `out` writable.
 */
PcStatus pc_dataset_load(const char *dir, PcDataset **out);

/**
 * # Safety
 * `ds` must be a live handle and `dir` a NUL-terminated path.
 */
PcStatus pc_dataset_save(const PcDataset *ds, const char *dir);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void pc_dataset_free(PcDataset *ds);

/**
 * Sample count, steps `T`, joints `p`, pixels per frame and primitive
 * count. Any output pointer may be null.
 *
 * # Safety
 * `ds` must be a live handle; non-null outputs must be writable.
 */
PcStatus pc_dataset_shape(const PcDataset *ds,
                          size_t *samples,
                          size_t *steps,
                          size_t *joints,
                          size_t *pixels,
                          size_t *primitives);

/**
 * Copies the normalized `T × p` motor matrix of sample `index`.
 *
 * # Safety
 * `ds` must be a live handle and `out` hold `len` doubles.
 */
PcStatus pc_dataset_motor(const PcDataset *ds, size_t index, double *out, size_t len);

/**
 * Copies the primitive id of every sample.
 *
 * # Safety
 * `ds` must be a live handle and `out` hold `len` values.
 */
PcStatus pc_dataset_labels(const PcDataset *ds, size_t *out, size_t len);

/**
 * Draws a `q × k` matrix with entries from `N(0, 1/q)`.
 *
 * # Safety
 * `out` must be writable.
 */
PcStatus pc_projection_new(size_t k, size_t q, uint64_t seed, PcProjection **out);

/**
 * `out = P · v`.
 *
 * # Safety
 * `p` must be a live handle, `v` hold `k` and `out` hold `q` doubles.
 */
PcStatus pc_projection_apply(const PcProjection *p,
                             const double *v,
                             size_t k,
                             double *out,
                             size_t q);

/**
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void pc_projection_free(PcProjection *p);

/**
 * # Safety
 * `path` must be a NUL-terminated path and `out` writable.
 */
PcStatus pc_model_load(const char *path, PcModel **out);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void pc_model_free(PcModel *m);

/**
 * Latent size, steps and motor width. Any output pointer may be null.
 *
 * # Safety
 * `m` must be a live handle; non-null outputs must be writable.
 */
PcStatus pc_model_shape(const PcModel *m, size_t *latent_dim, size_t *steps, size_t *motor_dim);

/**
 * Decodes latent `z` into a `T × p` motor sequence.
 *
 * # Safety
 * `m` must be a live handle, `z` hold `q` and `out` hold `len` doubles.
 */
PcStatus pc_model_generate(const PcModel *m, const double *z, size_t q, double *out, size_t len);

/**
 * Frequency-domain resampling of a `steps × joints` matrix to `new_steps`
 * rows.
 *
 * # Safety
 * `input` must hold `steps · joints` and `out` `out_len` doubles.
 */
PcStatus pc_resample(const double *input,
                     size_t steps,
                     size_t joints,
                     size_t new_steps,
                     double *out,
                     size_t out_len);

/**
 * Affine (or linear) subspace clustering of `n` latent rows of width `q`.
 * `tau <= 0` selects the shrinkage automatically. `labels` receives `n`
 * values; `r_squared` and `tau_used` may be null.
 *
 * # Safety
 * `z` must hold `n · q` doubles and `labels` `n` values.
 */
PcStatus pc_cluster(const double *z,
                    size_t n,
                    size_t q,
                    size_t k,
                    bool affine,
                    double tau,
                    uint64_t seed,
                    size_t *labels,
                    double *r_squared,
                    double *tau_used);

/**
 * Runs the intra-primitive experiment with a JSON training config (null
 * for defaults) and returns the report as JSON in `report_json`, to be
 * released with [`pc_string_free`].
 *
 * # Safety
 * `ds` must be a live handle, `config_json` null or NUL-terminated and
 * `report_json` writable.
 */
PcStatus pc_run_intra(const PcDataset *ds, const char *config_json, char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRIMCODEC_H */
