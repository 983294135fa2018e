#ifndef PARABOLIC_LS_H
#define PARABOLIC_LS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status of every call.
typedef enum PlsStatus {
  PLS_STATUS_OK = 0,
  PLS_STATUS_NULL_POINTER = 1,
  PLS_STATUS_INVALID_ARGUMENT = 2,
  PLS_STATUS_DOMAIN_ERROR = 3,
  PLS_STATUS_IO = 4,
  PLS_STATUS_PANIC = 5,
} PlsStatus;

// BMO variant selected by `pls_bmo_norm`.
typedef enum PlsBmoForm {
  // Mean oscillation about the cube average.
  PLS_BMO_FORM_OSCILLATION = 0,
  // Mean oscillation about the best constant.
  PLS_BMO_FORM_INF = 1,
  // Inf form plus the L1 norm.
  PLS_BMO_FORM_OVERLINE = 2,
} PlsBmoForm;

// Dyadic bands of a field.
typedef struct PlsBandStack PlsBandStack;

// Sampled field with its grid.
typedef struct PlsField PlsField;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *pls_last_error_message(void);

// Builds a field from `len` values in row-major order (time fastest).
// `shape` has `n + 1` entries and `box_len` has `n`.
//
// # Safety
// Pointers must be valid for the stated lengths; `out` must be writable.
enum PlsStatus pls_field_new(size_t n,
                             const size_t *shape,
                             const double *box_len,
                             double time_len,
                             bool periodic,
                             const double *values,
                             size_t len,
                             struct PlsField **out);

// Reads a field file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum PlsStatus pls_field_read(const char *path, struct PlsField **out);

// Writes a field file atomically.
//
// # Safety
// `field` must be a live handle and `path` a NUL-terminated string.
enum PlsStatus pls_field_write(const struct PlsField *field, const char *path);

// Number of samples.
//
// # Safety
// `field` must be a live handle or NULL.
size_t pls_field_len(const struct PlsField *field);

// Copies the samples into `buf`, which holds `len` entries.
//
// # Safety
// `field` must be a live handle and `buf` writable for `len` values.
enum PlsStatus pls_field_values(const struct PlsField *field, double *buf, size_t len);

// Releases a field handle. NULL is ignored.
//
// # Safety
// `field` must come from this library and not be used afterwards.
void pls_field_free(struct PlsField *field);

// BMO norm over the whole grid with the default cube family.
//
// # Safety
// `field` must be a live handle; `out` must be writable.
enum PlsStatus pls_bmo_norm(const struct PlsField *field, enum PlsBmoForm form, double *out);

// Parabolic Sobolev norm of order `m` over the whole grid.
//
// # Safety
// `field` must be a live handle; `out` must be writable.
enum PlsStatus pls_sobolev_norm(const struct PlsField *field, uint32_t m, double *out);

// Lizorkin-Triebel norm; pass `INFINITY` for an infinite exponent.
//
// # Safety
// `field` must be a live handle; `out` must be writable.
enum PlsStatus pls_lt_norm(const struct PlsField *field,
                           double s,
                           double p,
                           double q,
                           bool truncated,
                           double *out);

// Splits a periodic field into dyadic bands.
//
// # Safety
// `field` must be a live handle; `out` must be writable.
enum PlsStatus pls_decompose(const struct PlsField *field, struct PlsBandStack **out);

// Number of bands, 0 for NULL.
//
// # Safety
// `stack` must be a live handle or NULL.
size_t pls_bands_count(const struct PlsBandStack *stack);

// Copies band `j` out as a new field handle.
//
// # Safety
// `stack` must be a live handle; `out` must be writable.
enum PlsStatus pls_band(const struct PlsBandStack *stack, size_t j, struct PlsField **out);

// Releases a band stack. NULL is ignored.
//
// # Safety
// `stack` must come from this library and not be used afterwards.
void pls_bands_free(struct PlsBandStack *stack);

// Runs a named inequality check (`theorem1`, `theorem2`, `basic`, `interp`,
// `bandsup`, `lowband`) with Sobolev order `m`; writes the implied constant.
//
// # Safety
// `field` must be a live handle, `check` a NUL-terminated string and `out` writable.
enum PlsStatus pls_verify(const struct PlsField *field, const char *check, uint32_t m, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARABOLIC_LS_H */
