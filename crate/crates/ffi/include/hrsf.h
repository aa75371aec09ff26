#ifndef HRSF_H
#define HRSF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call. The first four values match the CLI exit codes.
 */
typedef enum HrsfStatus {
  HRSF_STATUS_OK = 0,
  HRSF_STATUS_INTERNAL = 1,
  HRSF_STATUS_VALIDATION = 2,
  HRSF_STATUS_TIMEOUT = 3,
  HRSF_STATUS_NULL_POINTER = 4,
  HRSF_STATUS_INVALID_ARGUMENT = 5,
} HrsfStatus;

typedef enum HrsfDetection {
  HRSF_DETECTION_DETECTED = 0,
  HRSF_DETECTION_NO_HUMAN = 1,
  HRSF_DETECTION_FAILED = 2,
} HrsfDetection;

typedef enum HrsfReason {
  HRSF_REASON_NO_HUMAN = 0,
  HRSF_REASON_CLEAR = 1,
  HRSF_REASON_VIOLATION = 2,
  HRSF_REASON_FAILED_DETECTION = 3,
} HrsfReason;

/**
 * Stateful velocity regulator for one perception method.
 */
typedef struct HrsfRegulator HrsfRegulator;

/**
 * Validated scenario document.
 */
typedef struct HrsfScenario HrsfScenario;

typedef struct HrsfVec3 {
  double x;
  double y;
  double z;
} HrsfVec3;

/**
 * Axis-aligned box in millimetres.
 */
typedef struct HrsfHull {
  struct HrsfVec3 min;
  struct HrsfVec3 max;
} HrsfHull;

/**
 * Estimated body point. `label` is a body-part index in `0..10`
 * (head, body, left/right upper arm, left/right lower arm, left/right upper
 * leg, left/right lower leg) or `-1` for a whole-body point.
 */
typedef struct HrsfBodyPoint {
  int32_t label;
  struct HrsfVec3 position;
} HrsfBodyPoint;

typedef struct HrsfDecision {
  double commanded_velocity_mm_s;
  /**
   * Smallest measured separation, NaN when nothing was measured.
   */
  double nearest_distance_mm;
  /**
   * Part whose limit sets the command, `-1` for none.
   */
  int32_t limiting_part;
  uint32_t violating_count;
  enum HrsfReason reason;
  bool holding;
} HrsfDecision;

typedef struct HrsfRunSummary {
  double t_cycle_s;
  double no_interference_time_s;
  double min_commanded_mm_s;
  /**
   * NaN when no separation was ever measured.
   */
  double min_separation_mm;
  uint64_t steps;
} HrsfRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread, or NULL after a
 * success. The pointer stays valid until the next call on the same thread.
 */
const char *hrsf_last_error(void);

/**
 * Human-motion separation for a latency budget under the default approach
 * speeds. Pass NaN for `current_distance_mm` when no separation is known.
 */
enum HrsfStatus hrsf_compute_sh(double t_lat_max_ms, double current_distance_mm, double *out_mm);

/**
 * Intrusion distance for a sensor of the given detection capacity.
 */
enum HrsfStatus hrsf_compute_c(double detection_capacity_mm, double *out_mm);

/**
 * Euclidean distance from `point` to `hull`; zero inside.
 *
 * # Safety
 * `point` and `hull` must each be NULL or point to a readable value.
 */
enum HrsfStatus hrsf_point_hull_distance(const struct HrsfVec3 *point,
                                         const struct HrsfHull *hull,
                                         double *out_mm);

/**
 * Creates a regulator for method `method` (0 body recognition, 1 body
 * segmentation, 2 pose estimation, 3 body-part segmentation) with the
 * built-in profile, safety constants and velocity limits. `scalar_mode`
 * selects the scalar uncertainty budget instead of per-axis hull growth.
 */
enum HrsfStatus hrsf_regulator_new(int32_t method,
                                   bool scalar_mode,
                                   double hysteresis_margin_mm,
                                   uint32_t clear_frames_required,
                                   uint32_t failures_before_fallback,
                                   struct HrsfRegulator **out);

/**
 * # Safety
 * `regulator` must be NULL or a handle from [`hrsf_regulator_new`] that has
 * not been freed.
 */
void hrsf_regulator_free(struct HrsfRegulator *regulator);

/**
 * One regulation step for `count` estimated points against the robot's
 * un-inflated `hull`. The regulator keeps its hysteresis and failure state
 * between calls.
 *
 * # Safety
 * `regulator` must be a live handle, `points` must hold `count` readable
 * entries (it may be NULL when `count` is 0), and `hull` must be readable.
 */
enum HrsfStatus hrsf_regulator_evaluate(struct HrsfRegulator *regulator,
                                        enum HrsfDetection detection,
                                        const struct HrsfBodyPoint *points,
                                        size_t count,
                                        const struct HrsfHull *hull,
                                        struct HrsfDecision *out);

/**
 * Loads and validates a scenario document.
 *
 * # Safety
 * `path` must be NULL or a nul-terminated string.
 */
enum HrsfStatus hrsf_scenario_load(const char *path, struct HrsfScenario **out);

/**
 * # Safety
 * `scenario` must be NULL or a handle from [`hrsf_scenario_load`] that has
 * not been freed.
 */
void hrsf_scenario_free(struct HrsfScenario *scenario);

/**
 * Simulates one cycle. `method` indexes body recognition, body
 * segmentation, pose estimation, body-part segmentation, laser scanner and
 * fixed lowest speed in that order; `-1` uses the document's method.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum HrsfStatus hrsf_scenario_run(const struct HrsfScenario *scenario,
                                  int32_t method,
                                  uint64_t seed,
                                  struct HrsfRunSummary *out);

/**
 * Runs a scenario file and writes its trace and summary into `out_dir`,
 * exactly as the `run` command does.
 *
 * # Safety
 * `config_path` and `out_dir` must be NULL or nul-terminated strings.
 */
enum HrsfStatus hrsf_run_scenario_file(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HRSF_H */
