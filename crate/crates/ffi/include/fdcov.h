/* SPDX-License-Identifier: MIT OR Apache-2.0 */

#ifndef FDCOV_H
#define FDCOV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum FdStatus {
  FD_STATUS_OK = 0,
  // Malformed, inconsistent or non-finite data.
  FD_STATUS_INVALID_INPUT = 2,
  FD_STATUS_CONFIG = 3,
  // Degenerate variance or failed factorization.
  FD_STATUS_NUMERICAL = 4,
  FD_STATUS_IO = 5,
  FD_STATUS_NULL_POINTER = 6,
  // A Rust panic was caught at the boundary.
  FD_STATUS_PANIC = 7,
} FdStatus;

// Result of one homogeneity test.
typedef struct FdDetection FdDetection;

// Observation tensor.
typedef struct FdSample FdSample;

// Result of binary segmentation.
typedef struct FdSegmentation FdSegmentation;

// Test settings. Obtain defaults from [`fd_config_default`].
typedef struct FdConfig {
  double alpha;
  size_t mc_reps;
  size_t band_b;
  size_t tail_w;
  bool approx_enabled;
  uint64_t seed;
  size_t min_segment;
  size_t cluster_gap;
} FdConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next `fd_*` call on the same thread.
const char *fd_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *fd_version(void);

// Writes the default configuration to `out`.
//
// # Safety
// `out` must be NULL or point to writable memory for one `FdConfig`.
enum FdStatus fd_config_default(struct FdConfig *out);

// Loads an FDT1 or long-CSV file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FdStatus fd_sample_load(const char *path, struct FdSample **out);

// Copies an `n x t x p` row-major tensor (subject, then time, then variable).
//
// # Safety
// `data` must point to `n * t * p` readable doubles; `out` must be writable.
enum FdStatus fd_sample_from_buffer(size_t n,
                                    size_t t,
                                    size_t p,
                                    const double *data,
                                    struct FdSample **out);

// Dimensions of a sample. Any output pointer may be NULL.
//
// # Safety
// `sample` must be a live handle; non-null outputs must be writable.
enum FdStatus fd_sample_dims(const struct FdSample *sample, size_t *n, size_t *t, size_t *p);

// # Safety
// `sample` must be NULL or a handle not yet freed.
void fd_sample_free(struct FdSample *sample);

// Tests covariance homogeneity over the whole sample. `config` may be NULL
// for defaults.
//
// # Safety
// `sample` must be a live handle; `config` NULL or valid; `out` writable.
enum FdStatus fd_detect(const struct FdSample *sample,
                        const struct FdConfig *config,
                        struct FdDetection **out);

// Locates all change points. `config` may be NULL for defaults.
//
// # Safety
// `sample` must be a live handle; `config` NULL or valid; `out` writable.
enum FdStatus fd_identify(const struct FdSample *sample,
                          const struct FdConfig *config,
                          struct FdSegmentation **out);

// Maximum standardized statistic; NaN on a NULL handle.
//
// # Safety
// `d` must be NULL or a live handle.
double fd_detection_m_n(const struct FdDetection *d);

// # Safety
// `d` must be NULL or a live handle.
double fd_detection_p_value(const struct FdDetection *d);

// # Safety
// `d` must be NULL or a live handle.
double fd_detection_critical_value(const struct FdDetection *d);

// 1-based time attaining the maximum; 0 on a NULL handle.
//
// # Safety
// `d` must be NULL or a live handle.
size_t fd_detection_argmax(const struct FdDetection *d);

// # Safety
// `d` must be NULL or a live handle.
bool fd_detection_reject(const struct FdDetection *d);

// Copies the standardized process into `buf` (up to `cap` values) and
// writes its full length to `len`.
//
// # Safety
// `d` must be a live handle; `buf` NULL or writable for `cap` doubles;
// `len` NULL or writable.
enum FdStatus fd_detection_zhat(const struct FdDetection *d, double *buf, size_t cap, size_t *len);

// Report as JSON; free with [`fd_string_free`]. NULL on a NULL handle.
//
// # Safety
// `d` must be NULL or a live handle.
char *fd_detection_to_json(const struct FdDetection *d);

// # Safety
// `d` must be NULL or a handle not yet freed.
void fd_detection_free(struct FdDetection *d);

// Copies the sorted change points (1-based) into `buf` (up to `cap`) and
// writes the total count to `len`.
//
// # Safety
// `s` must be a live handle; `buf` NULL or writable for `cap` values;
// `len` NULL or writable.
enum FdStatus fd_segmentation_change_points(const struct FdSegmentation *s,
                                            size_t *buf,
                                            size_t cap,
                                            size_t *len);

// Cluster representatives, same conventions as
// [`fd_segmentation_change_points`].
//
// # Safety
// As for [`fd_segmentation_change_points`].
enum FdStatus fd_segmentation_representatives(const struct FdSegmentation *s,
                                              size_t *buf,
                                              size_t cap,
                                              size_t *len);

// Result as JSON; free with [`fd_string_free`]. NULL on a NULL handle.
//
// # Safety
// `s` must be NULL or a live handle.
char *fd_segmentation_to_json(const struct FdSegmentation *s);

// # Safety
// `s` must be NULL or a handle not yet freed.
void fd_segmentation_free(struct FdSegmentation *s);

// # Safety
// `s` must be NULL or a string returned by this library and not yet freed.
void fd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FDCOV_H */
