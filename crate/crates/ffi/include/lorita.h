#ifndef LORITA_H
#define LORITA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LoritaStatus {
  LORITA_STATUS_OK = 0,
  LORITA_STATUS_NULL_POINTER = 1,
  LORITA_STATUS_INVALID_ARGUMENT = 2,
  LORITA_STATUS_SHAPE = 3,
  LORITA_STATUS_IO = 4,
  LORITA_STATUS_FORMAT = 5,
  LORITA_STATUS_NUMERIC = 6,
  LORITA_STATUS_BUFFER_TOO_SMALL = 7,
  LORITA_STATUS_PANIC = 8,
} LoritaStatus;

/**
 * Network of rank-`r` factor pairs.
 */
typedef struct LoritaCompressed LoritaCompressed;

/**
 * Trained (factorized or collapsed) network.
 */
typedef struct LoritaModel LoritaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library on the same thread.
 */
const char *lorita_last_error(void);

/**
 * Randomly initialized network with widths `dims[0..n_dims]` and `depth`
 * factors per layer.
 *
 * # Safety
 * `dims` must point to `n_dims` values and `out` must be writable.
 */
enum LoritaStatus lorita_model_init(const size_t *dims,
                                    size_t n_dims,
                                    size_t depth,
                                    uint64_t seed,
                                    struct LoritaModel **out);

/**
 * Loads a factorized or collapsed checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum LoritaStatus lorita_model_load(const char *path, struct LoritaModel **out);

/**
 * Writes the model as a factorized checkpoint.
 *
 * # Safety
 * `model` must come from this library; `path` must be NUL-terminated.
 */
enum LoritaStatus lorita_model_save(const struct LoritaModel *model,
                                    const char *path,
                                    uint64_t seed);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void lorita_model_free(struct LoritaModel *model);

/**
 * Input width, output width, layer count and stored parameter count.
 *
 * # Safety
 * `model` must come from this library; the out pointers may be null.
 */
enum LoritaStatus lorita_model_shape(const struct LoritaModel *model,
                                     size_t *in_dim,
                                     size_t *out_dim,
                                     size_t *num_layers,
                                     size_t *params);

/**
 * Logits for `rows` inputs of width `in_dim`, written to `out`
 * (`rows × out_dim` values).
 *
 * # Safety
 * `x` must hold `rows·cols` values and `out` `out_len` values.
 */
enum LoritaStatus lorita_model_logits(const struct LoritaModel *model,
                                      const double *x,
                                      size_t rows,
                                      size_t cols,
                                      double *out,
                                      size_t out_len);

/**
 * Global truncation keeping `keep` of the pooled normalized spectrum.
 *
 * # Safety
 * `model` must come from this library and `out` be writable.
 */
enum LoritaStatus lorita_compress_gsvt(const struct LoritaModel *model,
                                       double keep,
                                       struct LoritaCompressed **out);

/**
 * Local truncation to the same `rank` in every layer.
 *
 * # Safety
 * `model` must come from this library and `out` be writable.
 */
enum LoritaStatus lorita_compress_lsvt(const struct LoritaModel *model,
                                       size_t rank,
                                       struct LoritaCompressed **out);

/**
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
enum LoritaStatus lorita_compressed_load(const char *path, struct LoritaCompressed **out);

/**
 * # Safety
 * `model` must come from this library; `path` must be NUL-terminated.
 */
enum LoritaStatus lorita_compressed_save(const struct LoritaCompressed *model,
                                         const char *path,
                                         uint64_t seed);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void lorita_compressed_free(struct LoritaCompressed *model);

/**
 * Per-layer ranks into `ranks` (one per layer) and the deployed parameter
 * count, `Σ min(mn, (m+n)r)`.
 *
 * # Safety
 * `ranks` must hold `ranks_len` values; `params` may be null.
 */
enum LoritaStatus lorita_compressed_ranks(const struct LoritaCompressed *model,
                                          size_t *ranks,
                                          size_t ranks_len,
                                          size_t *params);

/**
 * # Safety
 * As [`lorita_model_logits`].
 */
enum LoritaStatus lorita_compressed_logits(const struct LoritaCompressed *model,
                                           const double *x,
                                           size_t rows,
                                           size_t cols,
                                           double *out,
                                           size_t out_len);

/**
 * Singular values of a row-major `rows × cols` matrix, descending, into
 * `out` (`min(rows, cols)` values).
 *
 * # Safety
 * `a` must hold `rows·cols` values and `out` `out_len` values.
 */
enum LoritaStatus lorita_singular_values(const double *a,
                                         size_t rows,
                                         size_t cols,
                                         double *out,
                                         size_t out_len);

/**
 * Schatten `p` (quasi-)norm `(Σ sᵢᵖ)^{1/p}`.
 *
 * # Safety
 * `a` must hold `rows·cols` values and `out` be writable.
 */
enum LoritaStatus lorita_schatten_norm(const double *a,
                                       size_t rows,
                                       size_t cols,
                                       double p,
                                       double *out);

/**
 * Parameter and multiply–accumulate counts of `"resnet20"` or `"vgg16"`.
 *
 * # Safety
 * `name` must be NUL-terminated; the out pointers may be null.
 */
enum LoritaStatus lorita_count_arch(const char *name, uint64_t *params, uint64_t *flops);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LORITA_H */
