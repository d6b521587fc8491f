/* C interface of the quasidiff library. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum QdStatus {
  QD_OK = 0,
  QD_NULL_ARGUMENT = 1,
  QD_INVALID_UTF8 = 2,
  QD_INVALID_ARGUMENT = 3,
  QD_DIMENSION_MISMATCH = 4,
  QD_OUT_OF_WINDOW = 5,
  QD_EMPTY_INPUT = 6,
  QD_UNKNOWN_PRESET = 7,
  QD_BUFFER_TOO_SMALL = 8,
  QD_NUMERIC_FAILURE = 9,
  QD_INTERNAL_ERROR = 10,
} QdStatus;

// Opaque weighted-comb handle (atom positions with complex weights).
typedef struct QdComb QdComb;

// Opaque point-sample handle.
typedef struct QdSample QdSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the most recent error message into `buf` (NUL-terminated,
// truncating) and returns the full message length in bytes.
//
// # Safety
// `buf` must point to `cap` writable bytes, or be null (then only the
// length is returned).
size_t qd_last_error_message(char *buf, size_t cap);

// Library version as a static NUL-terminated string.
const char *qd_version(void);

// Generates a sample from a named preset (`integers`, `fibonacci`,
// `thue-morse`, `period-doubling`, `fibonacci-cps`, `ammann-beenker`)
// restricted to the ball of the given radius.
//
// # Safety
// `preset` must be a NUL-terminated string and `out` a valid pointer; on
// success `*out` owns the sample and must be released with
// [`qd_sample_free`].
enum QdStatus qd_sample_from_preset(const char *preset, double radius, struct QdSample **out);

// Releases a sample handle. Passing null is a no-op.
//
// # Safety
// `s` must be a pointer previously returned by this library and not yet
// freed.
void qd_sample_free(struct QdSample *s);

// Number of points; 0 for null handles.
//
// # Safety
// `s` must be a live sample handle or null.
size_t qd_sample_len(const struct QdSample *s);

// Space dimension; 0 for null handles.
//
// # Safety
// `s` must be a live sample handle or null.
size_t qd_sample_dim(const struct QdSample *s);

// Sampling-ball radius; NaN for null handles.
//
// # Safety
// `s` must be a live sample handle or null.
double qd_sample_radius(const struct QdSample *s);

// Point density estimate `card / vol`; NaN for null handles.
//
// # Safety
// `s` must be a live sample handle or null.
double qd_sample_density(const struct QdSample *s);

// Copies the row-major coordinates (`len * dim` doubles) into `buf`.
//
// # Safety
// `s` must be a live sample handle; `buf` must point to `buf_len`
// writable doubles.
enum QdStatus qd_sample_coords(const struct QdSample *s, double *buf, size_t buf_len);

// Restriction of a sample to a smaller radius.
//
// # Safety
// `s` must be a live sample handle; `out` must be valid. On success the
// new handle must be released with [`qd_sample_free`].
enum QdStatus qd_sample_restrict(const struct QdSample *s, double radius, struct QdSample **out);

// Packing and covering radii of a sample with the given boundary margin.
//
// # Safety
// `s` must be a live sample handle; the out pointers must be valid.
enum QdStatus qd_structure_report(const struct QdSample *s,
                                  double margin,
                                  double *out_packing,
                                  double *out_covering);

// Hausdorff distance between the stereographic lifts of two samples.
//
// # Safety
// Both handles must be live; `out` must be valid.
enum QdStatus qd_hull_distance(const struct QdSample *a, const struct QdSample *b, double *out);

// Autocorrelation estimate: difference vectors with pair frequencies per
// unit volume, as a comb handle.
//
// # Safety
// `s` must be a live sample handle; `out` must be valid. On success the
// comb must be released with [`qd_comb_free`].
enum QdStatus qd_autocorrelation(const struct QdSample *s, double zmax, struct QdComb **out);

// Intensity `|c_k|^2` of the averaged exponential sum at wave vector `k`.
//
// # Safety
// `s` must be a live sample handle; `k` must point to `dim` doubles and
// `out` must be valid.
enum QdStatus qd_intensity(const struct QdSample *s, const double *k, size_t dim, double *out);

// Evaluates the amplitudes at `nk` candidate wave vectors (row-major,
// `nk * dim` doubles) and keeps peaks with intensity at or above the
// threshold. The result comb holds the peak positions with the complex
// amplitudes as weights.
//
// # Safety
// `s` must be a live sample handle; `ks` must point to `nk * dim`
// doubles; `out` must be valid. On success the comb must be released with
// [`qd_comb_free`].
enum QdStatus qd_bragg_scan(const struct QdSample *s,
                            const double *ks,
                            size_t nk,
                            double threshold,
                            struct QdComb **out);

// Releases a comb handle. Passing null is a no-op.
//
// # Safety
// `c` must be a pointer previously returned by this library and not yet
// freed.
void qd_comb_free(struct QdComb *c);

// Number of atoms; 0 for null handles.
//
// # Safety
// `c` must be a live comb handle or null.
size_t qd_comb_len(const struct QdComb *c);

// Space dimension; 0 for null handles.
//
// # Safety
// `c` must be a live comb handle or null.
size_t qd_comb_dim(const struct QdComb *c);

// Copies the atoms as rows `(z_1 .. z_d, re, im)`, `len * (dim + 2)`
// doubles in total.
//
// # Safety
// `c` must be a live comb handle; `buf` must point to `buf_len` writable
// doubles.
enum QdStatus qd_comb_rows(const struct QdComb *c, double *buf, size_t buf_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
