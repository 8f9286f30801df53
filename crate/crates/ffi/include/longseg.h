#ifndef LONGSEG_H
#define LONGSEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LsegStatus {
  LSEG_STATUS_OK = 0,
  LSEG_STATUS_NULL_POINTER = 1,
  LSEG_STATUS_INVALID_UTF8 = 2,
  LSEG_STATUS_INVALID_ARGUMENT = 3,
  LSEG_STATUS_INVALID_CONFIG = 4,
  LSEG_STATUS_NOT_FOUND = 5,
  LSEG_STATUS_ENDPOINT = 6,
  /**
   * The candidate text is not a delimiter insertion of the reference.
   */
  LSEG_STATUS_MALFORMED = 7,
  LSEG_STATUS_BUFFER_TOO_SMALL = 8,
  LSEG_STATUS_PANIC = 9,
  LSEG_STATUS_INTERNAL = 10,
} LsegStatus;

/**
 * Per-token SPLIT/CONTINUE labels of one transcript.
 */
typedef struct LsegLabels LsegLabels;

/**
 * A configured window segmenter plus its windowing pipeline.
 */
typedef struct LsegSegmenter LsegSegmenter;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into this library on the same thread.
 */
const char *lseg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lseg_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void lseg_string_free(char *s);

/**
 * Builds a segmenter from a TOML pipeline configuration (same format as
 * the command-line `--config` file).
 *
 * # Safety
 * `config_toml` must be a valid NUL-terminated string; `out` must be a
 * valid pointer to writable storage.
 */
enum LsegStatus lseg_segmenter_from_toml(const char *config_toml, struct LsegSegmenter **out);

/**
 * A fixed-length segmenter (boundary every `segment_len` tokens).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum LsegStatus lseg_segmenter_fixed(size_t segment_len,
                                     size_t window_size,
                                     size_t window_left,
                                     size_t window_right,
                                     struct LsegSegmenter **out);

/**
 * # Safety
 * `seg` must come from this library and not have been freed. Null is ignored.
 */
void lseg_segmenter_free(struct LsegSegmenter *seg);

/**
 * Segments whitespace-tokenized `text`.
 *
 * # Safety
 * `seg` must be a live segmenter, `text` a NUL-terminated string and `out`
 * valid writable storage.
 */
enum LsegStatus lseg_segment(const struct LsegSegmenter *seg,
                             const char *text,
                             struct LsegLabels **out);

/**
 * Builds labels for `n` tokens with SPLIT at the given positions (position
 * 0 is always SPLIT).
 *
 * # Safety
 * `splits` must point to `count` readable values (or be null when `count`
 * is 0); `out` must be valid writable storage.
 */
enum LsegStatus lseg_labels_from_splits(size_t n,
                                        const size_t *splits,
                                        size_t count,
                                        struct LsegLabels **out);

/**
 * # Safety
 * `labels` must come from this library and not have been freed. Null is ignored.
 */
void lseg_labels_free(struct LsegLabels *labels);

/**
 * Number of tokens covered by `labels` (0 for null).
 *
 * # Safety
 * `labels` must be null or a live handle.
 */
size_t lseg_labels_len(const struct LsegLabels *labels);

/**
 * Copies the SPLIT positions (including 0) into `buf`. `written` receives
 * the number of positions; if `capacity` is too small nothing is copied,
 * `written` receives the required size and `BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `labels` must be a live handle, `buf` must hold `capacity` values (or be
 * null when `capacity` is 0) and `written` must be valid writable storage.
 */
enum LsegStatus lseg_labels_splits(const struct LsegLabels *labels,
                                   size_t *buf,
                                   size_t capacity,
                                   size_t *written);

/**
 * Renders `text` with `labels` as delimited text (no delimiter before the
 * first token). The result is released with [`lseg_string_free`].
 *
 * # Safety
 * All pointers must be valid; `delimiter` may be null for the default.
 */
enum LsegStatus lseg_render_delimited(const struct LsegLabels *labels,
                                      const char *text,
                                      const char *delimiter,
                                      char **out);

/**
 * Strict decoding of generated delimited text against the reference
 * tokens. On `MALFORMED`, `malformed_at` (if not null) receives the first
 * offending token index.
 *
 * # Safety
 * `candidate` and `reference` must be NUL-terminated strings, `delimiter`
 * null or NUL-terminated, `out` valid writable storage, `malformed_at`
 * null or writable.
 */
enum LsegStatus lseg_decode_delimited(const char *candidate,
                                      const char *reference,
                                      const char *delimiter,
                                      struct LsegLabels **out,
                                      size_t *malformed_at);

/**
 * Boundary F1 of `predicted` against `reference` (position 0 excluded).
 *
 * # Safety
 * Both handles must be live and `f1` valid writable storage.
 */
enum LsegStatus lseg_boundary_f1(const struct LsegLabels *predicted,
                                 const struct LsegLabels *reference,
                                 double *f1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LONGSEG_H */
