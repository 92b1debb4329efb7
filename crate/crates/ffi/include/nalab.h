#ifndef NALAB_H
#define NALAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NalabNormalization {
  NALAB_NORMALIZATION_OFF = 0,
  NALAB_NORMALIZATION_SCALAR = 1,
  NALAB_NORMALIZATION_EXACT_MASS = 2,
} NalabNormalization;

typedef enum NalabStatus {
  NALAB_STATUS_OK = 0,
  NALAB_STATUS_NULL_POINTER = 1,
  NALAB_STATUS_INVALID_UTF8 = 2,
  NALAB_STATUS_DOMAIN = 3,
  NALAB_STATUS_RANGE = 4,
  NALAB_STATUS_POLE = 5,
  NALAB_STATUS_PRECISION = 6,
  NALAB_STATUS_UNSUPPORTED = 7,
  NALAB_STATUS_CONFIG = 8,
  NALAB_STATUS_IO = 9,
  NALAB_STATUS_JSON = 10,
  NALAB_STATUS_BUFFER_TOO_SMALL = 11,
  NALAB_STATUS_PANIC = 12,
} NalabStatus;

// Radial model on the canonical space.
typedef struct NalabModel NalabModel;

// Truncated homogeneous tree.
typedef struct NalabTree NalabTree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call into the library on the same thread.
const char *nalab_last_error(void);

// Library version as a static string.
const char *nalab_version(void);

// # Safety
// `s` must come from this library and not have been freed.
void nalab_string_free(char *s);

// Builds a radial model on the canonical space with annuli `1..=j_max` and
// scales `1..=n_max`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum NalabStatus nalab_model_new(size_t j_max,
                                 size_t n_max,
                                 enum NalabNormalization normalization,
                                 struct NalabModel **out);

// # Safety
// `model` must come from [`nalab_model_new`] and not have been freed.
void nalab_model_free(struct NalabModel *model);

// Number of annuli, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t nalab_model_j_max(const struct NalabModel *model);

// Writes `A_N f` over its valid window. `*out_len` receives the window
// length even when the buffer is too small.
//
// # Safety
// `model` must be a live handle, `f` must hold `len` values and `out` must
// have room for `capacity` values.
enum NalabStatus nalab_model_average(const struct NalabModel *model,
                                     const double *f,
                                     size_t len,
                                     size_t n,
                                     double *out,
                                     size_t capacity,
                                     size_t *out_len);

// Writes `M^dis f` over its valid window.
//
// # Safety
// As for [`nalab_model_average`].
enum NalabStatus nalab_model_maximal(const struct NalabModel *model,
                                     const double *f,
                                     size_t len,
                                     double *out,
                                     size_t capacity,
                                     size_t *out_len);

// Builds the tree `T_k` truncated at `depth`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum NalabStatus nalab_tree_new(size_t k, size_t depth, struct NalabTree **out);

// # Safety
// `tree` must come from [`nalab_tree_new`] and not have been freed.
void nalab_tree_free(struct NalabTree *tree);

// Vertex count, or 0 for a null handle. Vertices are numbered breadth first
// from the root.
//
// # Safety
// `tree` must be null or a live handle.
size_t nalab_tree_vertex_count(const struct NalabTree *tree);

// Exact centered maximal function of `f`, one value per vertex.
//
// # Safety
// `tree` must be a live handle, `f` must hold `len` values and `out` must
// have room for `capacity` values.
enum NalabStatus nalab_tree_maximal(const struct NalabTree *tree,
                                    const double *f,
                                    size_t len,
                                    double *out,
                                    size_t capacity,
                                    size_t *out_len);

// `φ_λ^{(σ,τ)}(t)` for complex `λ`.
//
// # Safety
// `out_re` and `out_im` must be valid writable pointers.
enum NalabStatus nalab_jacobi_phi(double sigma,
                                  double tau,
                                  double lambda_re,
                                  double lambda_im,
                                  double t,
                                  double *out_re,
                                  double *out_im);

// Runs an experiment config given as JSON (a single check or a sweep over
// its axes) and returns the outcome as JSON in `*out`.
//
// # Safety
// `config` must be a NUL-terminated string and `out` a valid writable pointer.
enum NalabStatus nalab_run_config(const char *config, char **out);

// Runs a named experiment and returns its outcome as JSON in `*out`.
//
// # Safety
// `id` must be a NUL-terminated string and `out` a valid writable pointer.
enum NalabStatus nalab_reproduce(const char *id, uint64_t seed, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NALAB_H */
