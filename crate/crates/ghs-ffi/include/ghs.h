#ifndef GHS_H
#define GHS_H

/* Generated by cbindgen from the ghs-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Training algorithm selector for [`ghs_train`].
 */
typedef enum GhsMethod {
  /**
   * Data-dependent quantization-loss training.
   */
  GHS_METHOD_DD = 0,
  /**
   * Data-independent sphere-spread training.
   */
  GHS_METHOD_DI = 1,
  /**
   * Sign-random-projection baseline.
   */
  GHS_METHOD_LSH = 2,
} GhsMethod;

/**
 * Status code returned by every fallible entry point.
 */
typedef enum GhsStatus {
  GHS_STATUS_OK = 0,
  /**
   * A parameter value was rejected.
   */
  GHS_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The operating system reported an I/O failure.
   */
  GHS_STATUS_IO = 2,
  /**
   * A file's contents were malformed.
   */
  GHS_STATUS_PARSE = 3,
  /**
   * A numeric routine failed (singular system, degenerate data, ...).
   */
  GHS_STATUS_NUMERIC = 4,
  /**
   * Two buffers or shapes disagreed.
   */
  GHS_STATUS_DIMENSION_MISMATCH = 5,
  /**
   * A required pointer was null.
   */
  GHS_STATUS_NULL_POINTER = 6,
  /**
   * An internal invariant failed; the library caught a panic.
   */
  GHS_STATUS_PANIC = 7,
} GhsStatus;

/**
 * Opaque trained-model handle.
 */
typedef struct GhsModel GhsModel;

/**
 * Options for [`ghs_train`]. Obtain defaults from
 * [`ghs_train_options_default`] and override selectively; zero or negative
 * values mean "use the default" for every tunable except `seed`.
 */
typedef struct GhsTrainOptions {
  /**
   * Code length in bits (>= 2).
   */
  uint32_t bits;
  enum GhsMethod method;
  /**
   * Bits-per-dimension ratio; <= 0 picks the built-in default.
   */
  double rho;
  /**
   * Satellite sphere radius; <= 0 picks the default (2.0).
   */
  double r_s;
  /**
   * Explicit embedded dimension; 0 derives it from `rho`.
   */
  uint32_t dims;
  /**
   * Non-zero trains the embedding against `labels`.
   */
  uint8_t supervised;
  /**
   * Regularization for the supervised embedding; < 0 picks the default.
   */
  double cca_reg;
  /**
   * Iteration cap; 0 keeps the trainer default.
   */
  uint32_t max_iter;
  /**
   * Convergence window on the quantization loss; <= 0 keeps the default.
   */
  double epsilon;
  /**
   * RNG seed.
   */
  uint64_t seed;
} GhsTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or an empty
 * string after a success. The pointer stays valid until the next `ghs_*`
 * call on the same thread.
 */
const char *ghs_last_error(void);

/**
 * Fills `out` with the default training options for `bits`-bit codes.
 */
enum GhsStatus ghs_train_options_default(uint32_t bits, struct GhsTrainOptions *out);

/**
 * Trains a model on a row-major `rows x cols` matrix.
 *
 * `labels` may be null unless `options->supervised` is set; when non-null it
 * must hold `rows` class indices. On success `*out_model` owns the model.
 *
 * # Safety
 * `data` must point to `rows * cols` doubles; `labels`, when non-null, to
 * `rows` values.
 */
enum GhsStatus ghs_train(const double *data,
                         size_t rows,
                         size_t cols,
                         const uint32_t *labels,
                         const struct GhsTrainOptions *options,
                         struct GhsModel **out_model);

/**
 * Loads a model file. On success `*out_model` owns the model.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_model` must be writable.
 */
enum GhsStatus ghs_model_load(const char *path, struct GhsModel **out_model);

/**
 * Saves a model to a file.
 *
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
enum GhsStatus ghs_model_save(const struct GhsModel *model, const char *path);

/**
 * Releases a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must have come from this library and not be freed twice.
 */
void ghs_model_free(struct GhsModel *model);

/**
 * Code length in bits, or 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
uint32_t ghs_model_bits(const struct GhsModel *model);

/**
 * Expected descriptor width, or 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
uint32_t ghs_model_input_dim(const struct GhsModel *model);

/**
 * `uint64_t` words per code row, or 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
uint32_t ghs_model_code_words(const struct GhsModel *model);

/**
 * Encodes a row-major `rows x cols` matrix into packed codes.
 *
 * # Safety
 * `data` must point to `rows * cols` doubles and `out_codes` to
 * `rows * ghs_model_code_words(model)` words.
 */
enum GhsStatus ghs_encode(const struct GhsModel *model,
                          const double *data,
                          size_t rows,
                          size_t cols,
                          uint64_t *out_codes);

/**
 * Hamming distance between two packed rows of `words` words each.
 *
 * # Safety
 * `a` and `b` must point to `words` words; `out_distance` must be writable.
 */
enum GhsStatus ghs_hamming(const uint64_t *a,
                           const uint64_t *b,
                           size_t words,
                           uint32_t *out_distance);

/**
 * Indices of the `k` base rows nearest a query in Hamming distance, ties by
 * ascending index. Writes at most `k` indices and stores the count actually
 * written in `*out_count`.
 *
 * # Safety
 * `query` must point to `ceil(bits/64)` words, `base` to `n_base` such rows,
 * and `out_indices` to `k` entries.
 */
enum GhsStatus ghs_topk(const uint64_t *query,
                        const uint64_t *base,
                        size_t n_base,
                        size_t bits,
                        size_t k,
                        size_t *out_indices,
                        size_t *out_count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GHS_H */
