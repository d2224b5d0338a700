#ifndef NMSYSID_H
#define NMSYSID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum NmsStatus {
  NMS_STATUS_OK = 0,
  NMS_STATUS_NULL_POINTER = 1,
  NMS_STATUS_INVALID_UTF8 = 2,
  NMS_STATUS_INVALID_ARGUMENT = 3,
  NMS_STATUS_SHAPE = 4,
  NMS_STATUS_DOMAIN = 5,
  NMS_STATUS_NOT_CONVERGED = 6,
  NMS_STATUS_NUMERICAL = 7,
  NMS_STATUS_RANK = 8,
  NMS_STATUS_IO = 9,
  NMS_STATUS_PARSE = 10,
  NMS_STATUS_PANIC = 11,
} NmsStatus;

/**
 * Trajectory dataset handle.
 */
typedef struct NmsDataset NmsDataset;

/**
 * Result of a projected-gradient fit.
 */
typedef struct NmsFitReport NmsFitReport;

/**
 * Model handle `(A, B, D)`.
 */
typedef struct NmsModel NmsModel;

typedef struct NmsDatasetShape {
  size_t trajectories;
  size_t state_dim;
  size_t input_dim;
  size_t m;
  size_t q;
} NmsDatasetShape;

typedef struct NmsModelShape {
  size_t state_dim;
  size_t input_dim;
  size_t m;
  size_t q;
  size_t bandwidth;
} NmsModelShape;

/**
 * Solver settings; obtain defaults from [`nms_fit_options_default`].
 */
typedef struct NmsFitOptions {
  double t0;
  double eta;
  size_t max_steps;
  /**
   * Kernel bandwidth; 0 selects `q + 1`.
   */
  size_t bandwidth;
} NmsFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *nms_last_error_message(void);

void nms_clear_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nms_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void nms_string_free(char *s);

/**
 * Builds a dataset from `count` equally sized trajectories.
 *
 * `states` holds `count` column-major `state_dim x num_states` blocks and
 * `inputs` holds `count` column-major `input_dim x num_inputs` blocks.
 *
 * # Safety
 * The arrays must hold the stated number of values; `out` must be writable.
 */
enum NmsStatus nms_dataset_new(size_t q,
                               size_t m,
                               size_t count,
                               size_t state_dim,
                               size_t num_states,
                               const double *states,
                               size_t input_dim,
                               size_t num_inputs,
                               const double *inputs,
                               struct NmsDataset **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum NmsStatus nms_dataset_from_json(const char *json, struct NmsDataset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum NmsStatus nms_dataset_load(const char *path, struct NmsDataset **out);

/**
 * # Safety
 * `data` must be a live handle and `path` a NUL-terminated string.
 */
enum NmsStatus nms_dataset_save(const struct NmsDataset *data, const char *path);

/**
 * # Safety
 * `data` must be a live handle; `out` must be writable. Free the result
 * with [`nms_string_free`].
 */
enum NmsStatus nms_dataset_to_json(const struct NmsDataset *data, char **out);

/**
 * # Safety
 * `data` must be a live handle; `out` must be writable.
 */
enum NmsStatus nms_dataset_shape(const struct NmsDataset *data, struct NmsDatasetShape *out);

/**
 * Copies every state of trajectory `index` (column-major).
 *
 * # Safety
 * `data` must be a live handle; `out` must hold `capacity` values.
 */
enum NmsStatus nms_dataset_states(const struct NmsDataset *data,
                                  size_t index,
                                  double *out,
                                  size_t capacity,
                                  size_t *written);

/**
 * # Safety
 * `data` must be null or a handle from this library, freed once.
 */
void nms_dataset_free(struct NmsDataset *data);

/**
 * Builds a model from column-major `A` (`n x n`), `B` (`n x k`) and the
 * kernel coefficients `c_1 .. c_{Q-1}`.
 *
 * # Safety
 * The arrays must hold the stated number of values; `out` must be writable.
 */
enum NmsStatus nms_model_new(size_t state_dim,
                             size_t input_dim,
                             const double *a,
                             const double *b,
                             size_t m,
                             size_t q,
                             size_t bandwidth,
                             const double *coeffs,
                             struct NmsModel **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum NmsStatus nms_model_from_json(const char *json, struct NmsModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum NmsStatus nms_model_load(const char *path, struct NmsModel **out);

/**
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated string.
 */
enum NmsStatus nms_model_save(const struct NmsModel *model, const char *path);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable. Free the result
 * with [`nms_string_free`].
 */
enum NmsStatus nms_model_to_json(const struct NmsModel *model, char **out);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum NmsStatus nms_model_shape(const struct NmsModel *model, struct NmsModelShape *out);

/**
 * Copies `A` (column-major).
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `capacity` values.
 */
enum NmsStatus nms_model_a(const struct NmsModel *model,
                           double *out,
                           size_t capacity,
                           size_t *written);

/**
 * Copies `B` (column-major).
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `capacity` values.
 */
enum NmsStatus nms_model_b(const struct NmsModel *model,
                           double *out,
                           size_t capacity,
                           size_t *written);

/**
 * Copies the kernel coefficients `c_1 .. c_{Q-1}`.
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `capacity` values.
 */
enum NmsStatus nms_model_coeffs(const struct NmsModel *model,
                                double *out,
                                size_t capacity,
                                size_t *written);

/**
 * # Safety
 * `model` must be null or a handle from this library, freed once.
 */
void nms_model_free(struct NmsModel *model);

struct NmsFitOptions nms_fit_options_default(void);

/**
 * Fits `(A, B, D)` by projected gradient descent.
 *
 * `constraints` is `"a1b"`, `"a2b"`, `"none"` or a constraint-spec JSON
 * document. `graph_json` is a graph document supplying the sparsity mask;
 * it may be null when no constraint refers to the graph. `options` may be
 * null for defaults.
 *
 * # Safety
 * Pointers must be live handles or NUL-terminated strings as described;
 * `out` must be writable.
 */
enum NmsStatus nms_fit(const struct NmsDataset *data,
                       const char *constraints,
                       const char *graph_json,
                       const struct NmsFitOptions *options,
                       struct NmsFitReport **out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum NmsStatus nms_fit_report_model(const struct NmsFitReport *report, struct NmsModel **out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum NmsStatus nms_fit_report_steps(const struct NmsFitReport *report, size_t *out);

/**
 * Copies the loss at every iterate, starting with the initial point.
 *
 * # Safety
 * `report` must be a live handle; `out` must hold `capacity` values.
 */
enum NmsStatus nms_fit_report_losses(const struct NmsFitReport *report,
                                     double *out,
                                     size_t capacity,
                                     size_t *written);

/**
 * Copies the accepted stepsize of each iteration.
 *
 * # Safety
 * `report` must be a live handle; `out` must hold `capacity` values.
 */
enum NmsStatus nms_fit_report_stepsizes(const struct NmsFitReport *report,
                                        double *out,
                                        size_t capacity,
                                        size_t *written);

/**
 * # Safety
 * `report` must be null or a handle from this library, freed once.
 */
void nms_fit_report_free(struct NmsFitReport *report);

/**
 * Markovian DMDc fit. `rank == 0` scans all ranks on the training set;
 * `pooled != 0` fits on every trajectory, otherwise on `fit_index`. The
 * rank used is written to `rank_used` when it is non-null.
 *
 * # Safety
 * `data` must be a live handle; `out` must be writable.
 */
enum NmsStatus nms_dmdc(const struct NmsDataset *data,
                        size_t rank,
                        int32_t pooled,
                        size_t fit_index,
                        struct NmsModel **out,
                        size_t *rank_used);

/**
 * Re-simulates every trajectory of `data` from its initial states and
 * inputs.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum NmsStatus nms_simulate(const struct NmsModel *model,
                            const struct NmsDataset *data,
                            struct NmsDataset **out);

/**
 * Training loss of `model` on `data`, with the kernel resized to `data`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum NmsStatus nms_loss(const struct NmsModel *model, const struct NmsDataset *data, double *out);

/**
 * Mean relative reconstruction error over the trajectories of `data`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum NmsStatus nms_mean_relative_error(const struct NmsModel *model,
                                       const struct NmsDataset *data,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NMSYSID_H */
