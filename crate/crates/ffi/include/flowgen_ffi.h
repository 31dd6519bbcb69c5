#ifndef FLOWGEN_FFI_H
#define FLOWGEN_FFI_H

/* Generated by cbindgen from the flowgen-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code for every fallible call in this ABI.
typedef enum FgStatus {
  // Success.
  FG_OK = 0,
  // A required pointer argument was null or a string was not UTF-8.
  FG_NULL_ARGUMENT = 1,
  // Invalid arguments or configuration (mirrors CLI exit code 2).
  FG_CONTRACT = 2,
  // I/O failure or malformed file (mirrors CLI exit code 3).
  FG_FORMAT = 3,
  // A numeric quantity became non-finite (mirrors CLI exit code 4).
  FG_NUMERIC = 4,
  // Internal panic; report this as a bug.
  FG_INTERNAL = 5,
} FgStatus;

// Conditional dataset handle: signals plus one condition per signal.
typedef struct FgDataset FgDataset;

// Trained generator handle, either flow-matching or diffusion.
typedef struct FgModel FgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fg_version(void);

// Message for the most recent failure on this thread. The pointer is
// valid until this thread's next flowgen call; copy it if you need to
// keep it.
const char *fg_last_error(void);

// Release a string returned by this library. Null is a no-op.
//
// # Safety
// `s` must have been returned by a flowgen call and not freed before.
void fg_string_free(char *s);

// Generate a synthetic dataset from a JSON spec (the same schema the
// `synth-data` CLI command reads).
//
// # Safety
// `spec_json` must be a NUL-terminated string, `out` a valid pointer.
enum FgStatus fg_dataset_synth(const char *spec_json, struct FgDataset **out);

// Load a dataset file written by this library or its CLI.
//
// # Safety
// `path` must be a NUL-terminated string, `out` a valid pointer.
enum FgStatus fg_dataset_load(const char *path, struct FgDataset **out);

// Write a dataset to disk in the library's binary format.
//
// # Safety
// `ds` must be a live dataset handle, `path` a NUL-terminated string.
enum FgStatus fg_dataset_save(const struct FgDataset *ds, const char *path);

// Number of signals; 0 if `ds` is null.
//
// # Safety
// `ds` must be null or a live dataset handle.
size_t fg_dataset_len(const struct FgDataset *ds);

// Channels per signal; 0 if `ds` is null.
//
// # Safety
// `ds` must be null or a live dataset handle.
size_t fg_dataset_channels(const struct FgDataset *ds);

// Samples per channel; 0 if `ds` is null.
//
// # Safety
// `ds` must be null or a live dataset handle.
size_t fg_dataset_samples(const struct FgDataset *ds);

// Width of each condition vector; 0 if `ds` is null.
//
// # Safety
// `ds` must be null or a live dataset handle.
size_t fg_dataset_condition_dim(const struct FgDataset *ds);

// Copy signal `index` into `out` as channel-major samples. `out_len`
// must equal `channels * samples`.
//
// # Safety
// `ds` must be a live dataset handle and `out` must point to at least
// `out_len` doubles.
enum FgStatus fg_dataset_signal(const struct FgDataset *ds,
                                size_t index,
                                double *out,
                                size_t out_len);

// Copy condition `index` into `out` as 0/1 bytes. `out_len` must equal
// the dataset's condition width.
//
// # Safety
// `ds` must be a live dataset handle and `out` must point to at least
// `out_len` bytes.
enum FgStatus fg_dataset_condition(const struct FgDataset *ds,
                                   size_t index,
                                   uint8_t *out,
                                   size_t out_len);

// Release a dataset handle. Null is a no-op.
//
// # Safety
// `ds` must have come from this library and not been freed before.
void fg_dataset_free(struct FgDataset *ds);

// Load a model checkpoint written by the `train` CLI command.
//
// # Safety
// `path` must be a NUL-terminated string, `out` a valid pointer.
enum FgStatus fg_model_load(const char *path, struct FgModel **out);

// Training method of a checkpoint: 0 = flow matching, 1 = diffusion,
// -1 if `model` is null.
//
// # Safety
// `model` must be null or a live model handle.
int32_t fg_model_method(const struct FgModel *model);

// Condition width the model was trained with; 0 if `model` is null.
//
// # Safety
// `model` must be null or a live model handle.
size_t fg_model_condition_dim(const struct FgModel *model);

// Draw `n` signals under an NFE budget. `conditions` is an `n x
// condition_dim` row-major matrix of 0/1 bytes; `ode_method` is
// "euler" or "midpoint" and is ignored by diffusion checkpoints.
//
// # Safety
// `model` must be a live model handle, `conditions` must point to
// `n * condition_dim` bytes, `ode_method` must be a NUL-terminated
// string, and `out` must be a valid pointer.
enum FgStatus fg_model_sample(const struct FgModel *model,
                              const uint8_t *conditions,
                              size_t n,
                              size_t condition_dim,
                              uint32_t nfe,
                              uint64_t seed,
                              const char *ode_method,
                              struct FgDataset **out);

// Release a model handle. Null is a no-op.
//
// # Safety
// `model` must have come from this library and not been freed before.
void fg_model_free(struct FgModel *model);

// Score `generated` against `real` and return the report as a JSON
// string (free it with `fg_string_free`). `opts_json` may be null for
// default options; otherwise it uses the same schema as the
// `evaluate` CLI command.
//
// # Safety
// `real` and `generated` must be live dataset handles, `opts_json`
// null or a NUL-terminated string, `out_json` a valid pointer.
enum FgStatus fg_evaluate(const struct FgDataset *real,
                          const struct FgDataset *generated,
                          const char *opts_json,
                          char **out_json);

// Dynamic-time-warping distance between two channel-major signals of
// equal channel count. `dist` selects the local distance: 0 = squared
// Euclidean, 1 = absolute.
//
// # Safety
// `a` must point to `a_channels * a_samples` doubles, `b` likewise,
// and `out` must be a valid pointer.
enum FgStatus fg_dtw(const double *a,
                     size_t a_channels,
                     size_t a_samples,
                     const double *b,
                     size_t b_channels,
                     size_t b_samples,
                     int32_t dist,
                     double *out);

// One-dimensional 1-Wasserstein distance between two sample sets.
//
// # Safety
// `xs` must point to `nx` doubles, `ys` to `ny` doubles, and `out`
// must be a valid pointer.
enum FgStatus fg_wasserstein1(const double *xs,
                              size_t nx,
                              const double *ys,
                              size_t ny,
                              double *out);

// Squared maximum mean discrepancy with an RBF kernel between two
// sets of `dim`-dimensional vectors, both row-major. `bandwidth <= 0`
// selects the median-heuristic bandwidth.
//
// # Safety
// `xs` must point to `nx * dim` doubles, `ys` to `ny * dim`, and
// `out` must be a valid pointer.
enum FgStatus fg_mmd2_rbf(const double *xs,
                          size_t nx,
                          const double *ys,
                          size_t ny,
                          size_t dim,
                          double bandwidth,
                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOWGEN_FFI_H */
