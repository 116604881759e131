#ifndef DP_PLR_H
#define DP_PLR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible library call.
 */
typedef enum {
  DP_PLR_STATUS_OK = 0,
  DP_PLR_STATUS_NULL_POINTER = 1,
  DP_PLR_STATUS_INVALID_ARGUMENT = 2,
  DP_PLR_STATUS_KEY_NOT_FOUND = 3,
  DP_PLR_STATUS_PARSE_ERROR = 4,
  DP_PLR_STATUS_INTERNAL_ERROR = 5,
} DpPlrStatus;

/**
 * Opaque sorted column handle.
 */
typedef struct DpPlrColumn DpPlrColumn;

/**
 * Opaque index handle; may hold any of the four index kinds.
 */
typedef struct DpPlrIndexHandle DpPlrIndexHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failing call on this thread, or NULL.
 * Valid until the next failing call on the same thread.
 */
const char *dp_plr_last_error_message(void);

/**
 * Static name of a status code.
 */
const char *dp_plr_status_name(DpPlrStatus status);

/**
 * Generates a deterministic synthetic column.
 * `dist` is one of "uniform", "lognormal", "zipf".
 *
 * # Safety
 * `dist` must be a NUL-terminated string and `out` a valid pointer.
 */
DpPlrStatus dp_plr_column_generate(const char *dist,
                                   uintptr_t n_keys,
                                   uint64_t n_tuples,
                                   uint64_t seed,
                                   DpPlrColumn **out);

/**
 * Parses a `{keys, counts, total}` JSON column document.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
DpPlrStatus dp_plr_column_from_json(const char *text, DpPlrColumn **out);

/**
 * Serializes a column as JSON; release the string with
 * [`dp_plr_string_free`].
 *
 * # Safety
 * `col` must be a live column handle and `out` a valid pointer.
 */
DpPlrStatus dp_plr_column_to_json(const DpPlrColumn *col, char **out);

/**
 * Number of distinct keys in the column.
 *
 * # Safety
 * `col` must be a live column handle and `out` a valid pointer.
 */
DpPlrStatus dp_plr_column_n_keys(const DpPlrColumn *col, uintptr_t *out);

/**
 * Tuple count of the column.
 *
 * # Safety
 * `col` must be a live column handle and `out` a valid pointer.
 */
DpPlrStatus dp_plr_column_total(const DpPlrColumn *col, uint64_t *out);

/**
 * Key at a 0-based position in the public domain.
 *
 * # Safety
 * `col` must be a live column handle and `out` a valid pointer.
 */
DpPlrStatus dp_plr_column_key_at(const DpPlrColumn *col, uintptr_t position, int64_t *out);

/**
 * Releases a column handle. Passing NULL is a no-op.
 *
 * # Safety
 * `col` must have been returned by this library and not freed before.
 */
void dp_plr_column_free(DpPlrColumn *col);

/**
 * Builds the learned index under epsilon-DP.
 *
 * Pass `alpha_s <= 0` for the default pessimism multiplier
 * sqrt(ln(2/beta)), and `tau < 0` for the default of half the curve error
 * bound.
 *
 * # Safety
 * `col` must be a live column handle and `out` a valid pointer.
 */
DpPlrStatus dp_plr_index_build(const DpPlrColumn *col,
                               double epsilon,
                               double beta,
                               double alpha_s,
                               double tau,
                               uint64_t seed,
                               DpPlrIndexHandle **out);

/**
 * Builds one of the baseline indexes: "dp_bplus" (uses `overflow_b`),
 * "crypte", or "special" (uses `mu`).
 *
 * # Safety
 * `col` must be a live column handle, `method` a NUL-terminated string and
 * `out` a valid pointer.
 */
DpPlrStatus dp_plr_index_build_baseline(const DpPlrColumn *col,
                                        const char *method,
                                        double epsilon,
                                        uint64_t overflow_b,
                                        double mu,
                                        uint64_t seed,
                                        DpPlrIndexHandle **out);

/**
 * Method tag of an index handle as a static string
 * ("dp_plr", "dp_bplus", "crypte", "special").
 *
 * # Safety
 * `idx` must be a live index handle.
 */
const char *dp_plr_index_method(const DpPlrIndexHandle *idx);

/**
 * Pessimistic position range for a key. Fails with `KeyNotFound` for keys
 * outside the public domain and `InvalidArgument` for count-style indexes.
 *
 * # Safety
 * `idx` must be a live index handle; `out_lo` and `out_hi` valid pointers.
 */
DpPlrStatus dp_plr_index_lookup_range(const DpPlrIndexHandle *idx,
                                      int64_t key,
                                      uint64_t *out_lo,
                                      uint64_t *out_hi);

/**
 * Returned-tuple count for a key on the leaf-count index.
 *
 * # Safety
 * `idx` must be a live index handle and `out_count` a valid pointer.
 */
DpPlrStatus dp_plr_index_lookup_count(const DpPlrIndexHandle *idx,
                                      int64_t key,
                                      uint64_t *out_count);

/**
 * Conservative range lookup between two keys (learned index only).
 *
 * # Safety
 * `idx` must be a live index handle; `out_lo` and `out_hi` valid pointers.
 */
DpPlrStatus dp_plr_index_range_lookup(const DpPlrIndexHandle *idx,
                                      int64_t key_lo,
                                      int64_t key_hi,
                                      uint64_t *out_lo,
                                      uint64_t *out_hi);

/**
 * Index payload size in bits under each method's accounting convention.
 *
 * # Safety
 * `idx` must be a live index handle and `out` a valid pointer.
 */
DpPlrStatus dp_plr_index_size_bits(const DpPlrIndexHandle *idx, uint64_t *out);

/**
 * Serializes the index envelope as JSON; release the string with
 * [`dp_plr_string_free`].
 *
 * # Safety
 * `idx` must be a live index handle and `out` a valid pointer.
 */
DpPlrStatus dp_plr_index_to_json(const DpPlrIndexHandle *idx, char **out);

/**
 * Loads any index envelope produced by this library or its CLI.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
DpPlrStatus dp_plr_index_from_json(const char *text, DpPlrIndexHandle **out);

/**
 * Releases an index handle. Passing NULL is a no-op.
 *
 * # Safety
 * `idx` must have been returned by this library and not freed before.
 */
void dp_plr_index_free(DpPlrIndexHandle *idx);

/**
 * Releases a string returned by this library. Passing NULL is a no-op.
 *
 * # Safety
 * `s` must have been returned by this library and not freed before.
 */
void dp_plr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DP_PLR_H */
