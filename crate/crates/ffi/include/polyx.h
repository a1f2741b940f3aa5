#ifndef POLYX_H
#define POLYX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum PolyxStatus {
  POLYX_STATUS_OK = 0,
  POLYX_STATUS_NULL_POINTER = 1,
  POLYX_STATUS_INVALID_INPUT = 2,
  POLYX_STATUS_DIMENSION_MISMATCH = 3,
  POLYX_STATUS_DEGENERATE_HYPERPLANE = 4,
  POLYX_STATUS_NON_FINITE = 5,
  POLYX_STATUS_EMPTY_POLYHEDRON = 6,
  POLYX_STATUS_LINEAR_DEPENDENCE = 7,
  POLYX_STATUS_BUDGET_EXCEEDED = 8,
  POLYX_STATUS_TIMEOUT = 9,
  POLYX_STATUS_ILL_CONDITIONED = 10,
  POLYX_STATUS_FORMAT = 11,
  POLYX_STATUS_IO = 12,
  POLYX_STATUS_PANIC = 13,
  POLYX_STATUS_OTHER = 14,
} PolyxStatus;

/**
 * Opaque polyhedron handle.
 */
typedef struct PolyxPolyhedron PolyxPolyhedron;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library from the same thread.
 */
const char *polyx_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *polyx_version(void);

/**
 * Builds a polyhedron from `count` halfspaces `normal . x <= offset`.
 * `normals` holds `count * dim` values, one row per halfspace. Normals are
 * rescaled to unit length.
 *
 * # Safety
 * `offsets` and `normals` must point to `count` and `count * dim` readable
 * doubles; `out` must be writable.
 */
enum PolyxStatus polyx_polyhedron_new(size_t dim,
                                      size_t count,
                                      const double *offsets,
                                      const double *normals,
                                      struct PolyxPolyhedron **out);

/**
 * Parses the JSON polyhedron format used by the command line tool.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum PolyxStatus polyx_polyhedron_from_json(const char *json, struct PolyxPolyhedron **out);

/**
 * Releases a handle. Null is accepted.
 *
 * # Safety
 * `h` must come from this library and must not be used afterwards.
 */
void polyx_polyhedron_free(struct PolyxPolyhedron *h);

/**
 * Ambient dimension, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t polyx_polyhedron_dim(const struct PolyxPolyhedron *h);

/**
 * Number of halfspaces, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t polyx_polyhedron_len(const struct PolyxPolyhedron *h);

/**
 * Writes 1 to `inside` when every residual of `x` is at most `tol`, else 0.
 *
 * # Safety
 * `x` must point to `dim` doubles; `inside` must be writable.
 */
enum PolyxStatus polyx_polyhedron_contains(const struct PolyxPolyhedron *h,
                                           const double *x,
                                           size_t dim,
                                           double tol,
                                           int32_t *inside);

/**
 * Nearest point of the polyhedron to `x`, written to `point` (`dim`
 * doubles), and the signed distance to its frontier (negative inside).
 *
 * # Safety
 * `x` and `point` must each hold `dim` doubles; `signed_distance` must be
 * writable or null.
 */
enum PolyxStatus polyx_min_norm(const struct PolyxPolyhedron *h,
                                const double *x,
                                size_t dim,
                                double *point,
                                double *signed_distance);

/**
 * Signed distance from `x` to the frontier of the polyhedron.
 *
 * # Safety
 * `x` must point to `dim` doubles; `out` must be writable.
 */
enum PolyxStatus polyx_signed_distance(const struct PolyxPolyhedron *h,
                                       const double *x,
                                       size_t dim,
                                       double *out);

/**
 * New handle holding only the irredundant halfspaces, in original order.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum PolyxStatus polyx_min_h_description(const struct PolyxPolyhedron *h,
                                         struct PolyxPolyhedron **out);

/**
 * Row-wise softmax of `-alpha * d` for a `rows x cols` row-major matrix of
 * signed distances, written to `out` (same shape).
 *
 * # Safety
 * `d` and `out` must each hold `rows * cols` doubles.
 */
enum PolyxStatus polyx_softmax(const double *d,
                               size_t rows,
                               size_t cols,
                               double alpha,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYX_H */
