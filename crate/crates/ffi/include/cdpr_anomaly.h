#ifndef CDPR_ANOMALY_H
#define CDPR_ANOMALY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum CdprStatus {
  CDPR_STATUS_OK = 0,
  CDPR_STATUS_NULL_POINTER = 1,
  CDPR_STATUS_INVALID_ARGUMENT = 2,
  CDPR_STATUS_DIMENSION_MISMATCH = 3,
  CDPR_STATUS_NOT_CALIBRATED = 4,
  CDPR_STATUS_NUMERICAL = 5,
  CDPR_STATUS_IO = 6,
  CDPR_STATUS_PARSE = 7,
  CDPR_STATUS_PANIC = 8,
} CdprStatus;

typedef enum CdprFlag {
  CDPR_FLAG_NORMAL = 0,
  CDPR_FLAG_ANOMALY = 1,
  CDPR_FLAG_SETTLING = 2,
  CDPR_FLAG_WARMUP = 3,
} CdprFlag;

typedef struct CdprDetector CdprDetector;

typedef struct CdprModel CdprModel;

typedef struct CdprStabilityReport CdprStabilityReport;

/**
 * Detector parameters. `refit_cooldown` and `clean_delay` fall back to
 * `smoothing` when negative.
 */
typedef struct CdprConfig {
  size_t n_motors;
  size_t window;
  size_t smoothing;
  size_t calibration;
  double gamma;
  double sample_rate;
  double guard_seconds;
  size_t k_min;
  size_t k_max;
  uint64_t seed;
  size_t max_iter;
  double tol;
  bool reselect_k;
  int64_t refit_cooldown;
  int64_t clean_delay;
} CdprConfig;

/**
 * `distance` and `smoothed` are NaN when `has_distance` is false.
 */
typedef struct CdprDecision {
  size_t sample_index;
  double t;
  bool has_distance;
  double distance;
  double smoothed;
  enum CdprFlag flag;
  bool model_updated;
} CdprDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *cdpr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cdpr_version(void);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum CdprStatus cdpr_config_default(struct CdprConfig *out);

/**
 * Creates an uncalibrated detector.
 *
 * # Safety
 * `config` must point to a valid config and `out` be valid for writes.
 */
enum CdprStatus cdpr_detector_new(const struct CdprConfig *config, struct CdprDetector **out);

/**
 * Calibrates on `n_samples` samples. `t` holds one timestamp per sample and
 * `tau` the torques row by row (`n_samples × n_motors`).
 *
 * # Safety
 * `det` must come from `cdpr_detector_new`; `t` and `tau` must hold
 * `n_samples` and `n_samples * n_motors` readable values.
 */
enum CdprStatus cdpr_detector_calibrate(struct CdprDetector *det,
                                        const double *t,
                                        const double *tau,
                                        size_t n_samples);

/**
 * Feeds one sample and writes the decision.
 *
 * # Safety
 * `det` must be a live detector, `tau` must hold `n_motors` values and
 * `out` must be valid for writes.
 */
enum CdprStatus cdpr_detector_step(struct CdprDetector *det,
                                   double t,
                                   const double *tau,
                                   size_t n_motors,
                                   struct CdprDecision *out);

/**
 * Enables or disables model refits (enabled by default).
 *
 * # Safety
 * `det` must be a live detector.
 */
enum CdprStatus cdpr_detector_set_updates(struct CdprDetector *det, bool enabled);

/**
 * # Safety
 * `det` must be a live detector and `out` valid for writes.
 */
enum CdprStatus cdpr_detector_threshold(const struct CdprDetector *det, double *out);

/**
 * # Safety
 * `det` must be a live detector and `out` valid for writes.
 */
enum CdprStatus cdpr_detector_update_count(const struct CdprDetector *det, size_t *out);

/**
 * Writes the detector snapshot (threshold, config and model) to `path`.
 *
 * # Safety
 * `det` must be a live detector and `path` a NUL-terminated string.
 */
enum CdprStatus cdpr_detector_save(const struct CdprDetector *det, const char *path);

/**
 * # Safety
 * `det` must come from `cdpr_detector_new` and not be used afterwards.
 * Null is ignored.
 */
void cdpr_detector_free(struct CdprDetector *det);

/**
 * Loads the model from a model snapshot or a detector snapshot.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
enum CdprStatus cdpr_model_load(const char *path, struct CdprModel **out);

/**
 * # Safety
 * `model` must be a live model and `out` valid for writes.
 */
enum CdprStatus cdpr_model_dim(const struct CdprModel *model, size_t *out);

/**
 * Mahalanobis distance from `x` to the nearest component.
 *
 * # Safety
 * `model` must be a live model, `x` must hold `dim` values and `out` must be
 * valid for writes.
 */
enum CdprStatus cdpr_model_distance(const struct CdprModel *model,
                                    const double *x,
                                    size_t dim,
                                    double *out);

/**
 * # Safety
 * `model` must come from `cdpr_model_load` and not be used afterwards.
 * Null is ignored.
 */
void cdpr_model_free(struct CdprModel *model);

/**
 * Runs the stability check on a geometry TOML file, or on the built-in
 * reference rig when `path` is null.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out` valid for writes.
 */
enum CdprStatus cdpr_stability_check(const char *path, struct CdprStabilityReport **out);

/**
 * # Safety
 * `report` must be a live report and `out` valid for writes.
 */
enum CdprStatus cdpr_stability_is_stable(const struct CdprStabilityReport *report, bool *out);

/**
 * Copies up to `capacity` eigenvalues (ascending) into `buf` and writes the
 * total count to `len`. `buf` may be null to query the count.
 *
 * # Safety
 * `report` must be a live report, `buf` null or valid for `capacity`
 * writes, and `len` valid for writes.
 */
enum CdprStatus cdpr_stability_eigenvalues(const struct CdprStabilityReport *report,
                                           double *buf,
                                           size_t capacity,
                                           size_t *len);

/**
 * # Safety
 * `report` must come from `cdpr_stability_check` and not be used
 * afterwards. Null is ignored.
 */
void cdpr_stability_free(struct CdprStabilityReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CDPR_ANOMALY_H */
